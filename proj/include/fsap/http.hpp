#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "fsap/error.hpp"
#include "fsap/util.hpp"

namespace fsap {

/// A URL split into the part cpp-httplib wants for the client and the request path.
struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // begins with '/'

    static Endpoint parse(std::string_view url);
};

/// POSTs JSON bodies to one endpoint. Failures are classified:
/// connection errors, 408, 429 and 5xx are TransientError; 401/403 are
/// AuthError; any other non-2xx or an unparseable body is a plain BackendError.
class JsonPoster {
public:
    JsonPoster(Endpoint endpoint, std::optional<std::string> bearer_token,
               std::chrono::seconds timeout = std::chrono::seconds(120));

    json post(const json& body) const;

    const Endpoint& endpoint() const { return endpoint_; }

private:
    Endpoint endpoint_;
    std::optional<std::string> bearer_;
    std::chrono::seconds timeout_;
};

/// Reads a credential from the named environment variable; throws ConfigError if unset.
std::string credential_from_env(const std::string& variable);

/// Exponential backoff: delay before attempt i+1 is base * factor^(i-1).
struct RetryPolicy {
    std::chrono::duration<double> base{1.0};
    double factor = 2.0;
    int max_attempts = 5;
    /// Replaced in tests to record delays instead of sleeping.
    std::function<void(std::chrono::duration<double>)> sleep;

    std::chrono::duration<double> delay_before(int attempt) const;
    void wait(std::chrono::duration<double> d) const;
};

/// Calls fn() until it succeeds, a non-retryable BackendError is thrown, or
/// attempts run out (the last error is rethrown).
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> std::invoke_result_t<Fn&> {
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const BackendError& e) {
            if (!e.retryable() || attempt >= policy.max_attempts) throw;
            policy.wait(policy.delay_before(attempt + 1));
        }
    }
}

}  // namespace fsap
