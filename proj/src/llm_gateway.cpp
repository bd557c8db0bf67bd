#include "fsap/llm_gateway.hpp"

#include <algorithm>
#include <array>
#include <thread>
#include <unordered_set>

#include "fsap/error.hpp"
#include "fsap/ranking.hpp"

namespace fsap {

namespace {

constexpr std::size_t kEchoLength = 120;
constexpr std::size_t kStuffRepeats = 30;
constexpr std::size_t kFlagRepeatThreshold = 30;

const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words = {
        "a", "an", "and", "are", "as", "at", "be", "by", "can", "could", "do", "does", "for",
        "from", "has", "have", "how", "i", "if", "in", "is", "it", "its", "of", "on", "or",
        "should", "that", "the", "this", "to", "was", "what", "when", "which", "who", "will",
        "with", "would"};
    return words;
}

constexpr std::array<std::string_view, 16> kFiller = {
    "studies", "report",   "evidence", "patients", "clinical", "benefit", "recent",   "experts",
    "findings", "research", "results", "effect",   "shows",    "many",    "treatment", "health"};

const std::unordered_set<std::string_view>& negation_cues() {
    static const std::unordered_set<std::string_view> cues = {
        "not", "no", "never", "ineffective", "doesn't", "cannot", "can't", "won't",
        "myth", "false", "useless", "fails", "harmful"};
    return cues;
}

std::string_view between(std::string_view text, std::string_view open, std::string_view close) {
    auto b = text.find(open);
    if (b == std::string_view::npos) return {};
    b += open.size();
    auto e = text.find(close, b);
    return text.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::string echo_topic_terms(std::string_view prompt) {
    auto tokens = tokenize(final_query_stanza(prompt));
    std::vector<std::string> terms;
    std::unordered_set<std::string> seen;
    for (auto& t : tokens)
        if (!stopwords().contains(t) && seen.insert(t).second) terms.push_back(t);
    if (terms.empty()) terms = tokens;
    if (terms.empty()) terms.push_back("document");

    const auto digest = sha256_hex(prompt);
    auto digest_byte = [&](std::size_t i) {
        i %= digest.size() / 2;
        return static_cast<std::size_t>(std::stoul(digest.substr(2 * i, 2), nullptr, 16));
    };
    const std::size_t offset = digest_byte(0) % terms.size();
    std::vector<std::string> out;
    out.reserve(kEchoLength);
    for (std::size_t i = 0; i < kEchoLength; ++i) {
        if (i % 4 == 3) {
            out.emplace_back(kFiller[digest_byte(1 + i / 4) % kFiller.size()]);
        } else {
            out.push_back(terms[(offset + i) % terms.size()]);
        }
    }
    return join(out) + ".";
}

std::string keyword_stuff(std::string_view prompt) {
    auto tokens = tokenize(final_query_stanza(prompt));
    std::vector<std::string> out;
    out.reserve(tokens.size() * kStuffRepeats);
    for (std::size_t r = 0; r < kStuffRepeats; ++r) out.insert(out.end(), tokens.begin(), tokens.end());
    return join(out);
}

std::string judge_heuristic(std::string_view prompt) {
    auto tokens = tokenize(between(prompt, "<document>", "</document>"));
    const bool detection = prompt.find("FLAG") != std::string_view::npos &&
                           prompt.find("PASS") != std::string_view::npos;
    if (detection) {
        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& t : tokens)
            if (++counts[t] >= kFlagRepeatThreshold) return "FLAG";
        return "PASS";
    }
    if (prompt.find("DOES_NOT_HELP") != std::string_view::npos) {
        for (const auto& t : tokens)
            if (negation_cues().contains(t)) return "DOES_NOT_HELP";
        return "HELPS";
    }
    return "";
}

}  // namespace

std::string_view to_string(BackendKind k) { return k == BackendKind::mock ? "MOCK" : "REMOTE_CHAT"; }

BackendKind parse_backend_kind(std::string_view s) {
    if (s == "MOCK") return BackendKind::mock;
    if (s == "REMOTE_CHAT") return BackendKind::remote_chat;
    throw ConfigError("unknown backend kind '" + std::string(s) + "'");
}

std::string_view to_string(MockBehavior b) {
    switch (b) {
        case MockBehavior::echo_topic_terms: return "ECHO_TOPIC_TERMS";
        case MockBehavior::fixed_text: return "FIXED_TEXT";
        case MockBehavior::keyword_stuff: return "KEYWORD_STUFF";
        case MockBehavior::judge_heuristic: return "JUDGE_HEURISTIC";
    }
    return "?";
}

MockBehavior parse_mock_behavior(std::string_view s) {
    if (s == "ECHO_TOPIC_TERMS") return MockBehavior::echo_topic_terms;
    if (s == "FIXED_TEXT") return MockBehavior::fixed_text;
    if (s == "KEYWORD_STUFF") return MockBehavior::keyword_stuff;
    if (s == "JUDGE_HEURISTIC") return MockBehavior::judge_heuristic;
    throw ConfigError("unknown mock behavior '" + std::string(s) + "'");
}

void ModelBackend::validate() const {
    if (backend_id.empty()) throw ConfigError("backend_id must be nonempty");
    if ((kind == BackendKind::remote_chat) != endpoint.has_value())
        throw ConfigError("backend " + backend_id + ": endpoint must be set iff kind is REMOTE_CHAT");
    if (model_name.empty()) throw ConfigError("backend " + backend_id + ": model is required");
    if (max_in_flight == 0) throw ConfigError("backend " + backend_id + ": max_in_flight must be > 0");
    if (requests_per_minute < 0) throw ConfigError("backend " + backend_id + ": negative rate limit");
    CompletionRequest{"x", defaults.temperature, defaults.max_tokens, {}}.validate();
}

void CompletionRequest::validate() const {
    if (prompt.empty()) throw std::invalid_argument("completion prompt must be nonempty");
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw std::invalid_argument("temperature must lie in [0, 2]");
    if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
}

std::string final_query_stanza(std::string_view prompt) {
    auto pos = prompt.rfind("Query:");
    if (pos == std::string_view::npos) return {};
    auto rest = prompt.substr(pos + 6);
    auto end = rest.find("Document:");
    if (end != std::string_view::npos) rest = rest.substr(0, end);
    return std::string(rest);
}

std::string mock_complete(std::string_view prompt, MockBehavior behavior, std::string_view fixed_text) {
    switch (behavior) {
        case MockBehavior::echo_topic_terms: return echo_topic_terms(prompt);
        case MockBehavior::fixed_text: return std::string(fixed_text);
        case MockBehavior::keyword_stuff: return keyword_stuff(prompt);
        case MockBehavior::judge_heuristic: return judge_heuristic(prompt);
    }
    return {};
}

std::string cache_key(const ModelBackend& backend, const CompletionRequest& request) {
    json material{{"backend_id", backend.backend_id},
                  {"model", backend.model_name},
                  {"prompt", request.prompt},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_tokens}};
    return sha256_hex(material.dump());
}

std::string MockTransport::send(const CompletionRequest& request) {
    return mock_complete(request.prompt, behavior_, fixed_text_);
}

std::string ChatTransport::send(const CompletionRequest& request) {
    json body{{"model", model_},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    auto response = poster_.post(body);
    if (response.contains("text") && response["text"].is_string()) return response["text"].get<std::string>();
    try {
        const auto& content = response.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
    } catch (const json::exception&) {
    }
    throw BackendError(poster_.endpoint().base + ": response missing text", false);
}

ResponseCache::ResponseCache(std::filesystem::path dir, TimestampSource clock)
    : dir_(std::move(dir)), clock_(std::move(clock)) {
    namespace fs = std::filesystem;
    fs::create_directories(*dir_);
    std::map<std::string, std::string> stored_at;
    if (fs::exists(*dir_ / "index.jsonl")) {
        for_each_jsonl(*dir_ / "index.jsonl", [&](const json& r, std::size_t) {
            stored_at[r.at("key").get<std::string>()] = r.at("stored_at").get<std::string>();
        });
    }
    for (const auto& entry : fs::directory_iterator(*dir_)) {
        if (entry.path().extension() != ".txt") continue;
        auto key = entry.path().stem().string();
        auto it = stored_at.find(key);
        entries_[key] = Entry{read_file(entry.path()), it != stored_at.end() ? it->second : clock_.now()};
    }
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second.value;
    return std::nullopt;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
    std::unique_lock lock(mutex_);
    if (entries_.contains(key)) return;
    if (dir_) write_file_atomic(*dir_ / (key + ".txt"), value);
    entries_.emplace(key, Entry{value, clock_.now()});
}

void ResponseCache::flush() const {
    if (!dir_) return;
    std::shared_lock lock(mutex_);
    std::vector<json> index;
    index.reserve(entries_.size());
    for (const auto& [key, entry] : entries_)
        index.push_back(json{{"key", key}, {"file", key + ".txt"}, {"stored_at", entry.stored_at}});
    write_file_atomic(*dir_ / "index.jsonl", to_jsonl(index));
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

RateLimiter::RateLimiter(double requests_per_minute) : per_second_(requests_per_minute / 60.0) {
    if (per_second_ <= 0) throw ConfigError("rate limit must be positive");
}

void RateLimiter::acquire() {
    for (;;) {
        std::chrono::duration<double> wait;
        {
            std::lock_guard lock(mutex_);
            auto now = Clock::now();
            tokens_ = std::min(1.0, tokens_ + std::chrono::duration<double>(now - last_).count() * per_second_);
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::duration<double>((1.0 - tokens_) / per_second_);
        }
        std::this_thread::sleep_for(wait);
    }
}

Gateway::Gateway(ModelBackend backend, std::unique_ptr<CompletionTransport> transport,
                 std::shared_ptr<ResponseCache> cache, RetryPolicy retry)
    : backend_(std::move(backend)),
      transport_(std::move(transport)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      retry_(std::move(retry)) {
    backend_.validate();
    if (backend_.requests_per_minute > 0) limiter_ = std::make_unique<RateLimiter>(backend_.requests_per_minute);
    in_flight_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(backend_.max_in_flight));
}

CompletionRequest Gateway::make_request(std::string prompt, std::string request_id) const {
    return CompletionRequest{std::move(prompt), backend_.defaults.temperature, backend_.defaults.max_tokens,
                             std::move(request_id)};
}

std::size_t Gateway::transport_calls() const {
    std::lock_guard lock(mutex_);
    return transport_calls_;
}

std::string Gateway::call_backend(const CompletionRequest& request) {
    in_flight_->acquire();
    struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
    } release{*in_flight_};
    return with_retries(retry_, [&] {
        if (limiter_) limiter_->acquire();
        {
            std::lock_guard lock(mutex_);
            ++transport_calls_;
        }
        return transport_->send(request);
    });
}

std::string Gateway::complete(const CompletionRequest& request) {
    request.validate();
    const auto key = cache_key(backend_, request);
    if (auto hit = cache_->get(key)) return *hit;

    std::promise<std::string> promise;
    std::shared_future<std::string> shared;
    {
        std::lock_guard lock(mutex_);
        if (auto hit = cache_->get(key)) return *hit;
        if (auto it = pending_.find(key); it != pending_.end()) {
            shared = it->second;
        } else {
            pending_.emplace(key, promise.get_future().share());
        }
    }
    if (shared.valid()) return shared.get();

    try {
        auto text = call_backend(request);
        cache_->put(key, text);
        promise.set_value(text);
        std::lock_guard lock(mutex_);
        pending_.erase(key);
        return text;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        pending_.erase(key);
        throw;
    }
}

std::unique_ptr<CompletionTransport> make_transport(const ModelBackend& backend) {
    backend.validate();
    if (backend.kind == BackendKind::mock)
        return std::make_unique<MockTransport>(backend.mock_behavior, backend.fixed_text);
    std::optional<std::string> token;
    if (backend.api_key_env) token = credential_from_env(*backend.api_key_env);
    return std::make_unique<ChatTransport>(JsonPoster(Endpoint::parse(*backend.endpoint), token),
                                           backend.model_name);
}

std::unique_ptr<Gateway> make_gateway(const ModelBackend& backend, std::shared_ptr<ResponseCache> cache,
                                      RetryPolicy retry) {
    return std::make_unique<Gateway>(backend, make_transport(backend), std::move(cache), std::move(retry));
}

}  // namespace fsap
