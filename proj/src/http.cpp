#include "fsap/http.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace fsap {

Endpoint Endpoint::parse(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos)
        throw ConfigError("endpoint '" + std::string(url) + "' lacks a scheme");
    auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw ConfigError("unsupported scheme in '" + std::string(url) + "'");
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    if (path_start == std::string_view::npos) {
        ep.base = std::string(url);
        ep.path = "/";
    } else {
        ep.base = std::string(url.substr(0, path_start));
        ep.path = std::string(url.substr(path_start));
    }
    if (ep.base.size() <= scheme_end + 3) throw ConfigError("endpoint '" + std::string(url) + "' lacks a host");
    return ep;
}

JsonPoster::JsonPoster(Endpoint endpoint, std::optional<std::string> bearer_token,
                       std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), bearer_(std::move(bearer_token)), timeout_(timeout) {}

json JsonPoster::post(const json& body) const {
    httplib::Client client(endpoint_.base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (bearer_) headers.emplace("Authorization", "Bearer " + *bearer_);

    auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
    const std::string where = endpoint_.base + endpoint_.path;
    if (!res) throw TransientError(where + ": " + httplib::to_string(res.error()));
    const int status = res->status;
    if (status == 401 || status == 403) throw AuthError(where + ": HTTP " + std::to_string(status));
    if (status == 408 || status == 429 || status >= 500)
        throw TransientError(where + ": HTTP " + std::to_string(status));
    if (status < 200 || status >= 300)
        throw BackendError(where + ": HTTP " + std::to_string(status) + ": " + res->body, false);
    try {
        return json::parse(res->body);
    } catch (const json::parse_error&) {
        throw BackendError(where + ": response is not JSON", false);
    }
}

std::string credential_from_env(const std::string& variable) {
    const char* value = std::getenv(variable.c_str());
    if (!value || !*value) throw ConfigError("environment variable " + variable + " is not set");
    return value;
}

std::chrono::duration<double> RetryPolicy::delay_before(int attempt) const {
    if (attempt <= 1) return std::chrono::duration<double>(0);
    return base * std::pow(factor, attempt - 2);
}

void RetryPolicy::wait(std::chrono::duration<double> d) const {
    if (sleep) {
        sleep(d);
    } else {
        std::this_thread::sleep_for(d);
    }
}

}  // namespace fsap
