#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "fsap/http.hpp"
#include "fsap/util.hpp"

namespace fsap {

enum class BackendKind { remote_chat, mock };

/// Behaviors of the offline test double. All are pure functions of the prompt.
enum class MockBehavior {
    echo_topic_terms,  // 120-token pseudo-document built from the target query's content terms
    fixed_text,        // a configured constant
    keyword_stuff,     // the target query's terms, repeated 30 times
    judge_heuristic,   // deterministic answers to the judge templates
};

std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);
std::string_view to_string(MockBehavior b);
MockBehavior parse_mock_behavior(std::string_view s);

struct DecodingParams {
    double temperature = 0.7;
    int max_tokens = 1024;
};

struct ModelBackend {
    std::string backend_id;
    BackendKind kind = BackendKind::mock;
    std::optional<std::string> endpoint;  // required iff remote_chat
    std::string model_name;
    DecodingParams defaults;
    MockBehavior mock_behavior = MockBehavior::echo_topic_terms;
    std::string fixed_text;
    std::optional<std::string> api_key_env;
    double requests_per_minute = 30.0;  // 0 disables rate limiting
    std::size_t max_in_flight = 4;

    void validate() const;
};

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::string request_id;

    void validate() const;
};

/// Text of the last "Query:" stanza in a prompt, up to the following "Document:" marker.
std::string final_query_stanza(std::string_view prompt);

std::string mock_complete(std::string_view prompt, MockBehavior behavior,
                          std::string_view fixed_text = {});

/// Digest of (backend_id, model_name, prompt, temperature, max_tokens).
std::string cache_key(const ModelBackend& backend, const CompletionRequest& request);

/// One attempt against a model service. Throws BackendError subclasses.
class CompletionTransport {
public:
    virtual ~CompletionTransport() = default;
    virtual std::string send(const CompletionRequest& request) = 0;
};

class MockTransport final : public CompletionTransport {
public:
    MockTransport(MockBehavior behavior, std::string fixed_text)
        : behavior_(behavior), fixed_text_(std::move(fixed_text)) {}

    std::string send(const CompletionRequest& request) override;

private:
    MockBehavior behavior_;
    std::string fixed_text_;
};

/// POST {model, messages: [{role, content}], temperature, max_tokens} -> {text}.
/// OpenAI-style {choices: [{message: {content}}]} responses are accepted too.
class ChatTransport final : public CompletionTransport {
public:
    ChatTransport(JsonPoster poster, std::string model) : poster_(std::move(poster)), model_(std::move(model)) {}

    std::string send(const CompletionRequest& request) override;

private:
    JsonPoster poster_;
    std::string model_;
};

/// Completion cache. With a directory it is persisted as one `<key>.txt` per
/// entry plus `index.jsonl`; the directory can be deleted at any time.
/// Entries are immutable: the first value stored under a key wins.
class ResponseCache {
public:
    ResponseCache() = default;
    ResponseCache(std::filesystem::path dir, TimestampSource clock);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);
    /// Rewrites the index, sorted by key.
    void flush() const;
    std::size_t size() const;

private:
    struct Entry {
        std::string value;
        std::string stored_at;
    };

    std::optional<std::filesystem::path> dir_;
    TimestampSource clock_ = TimestampSource::wall_clock();
    mutable std::shared_mutex mutex_;
    std::map<std::string, Entry> entries_;
};

/// Token bucket with a burst of one request.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute);
    void acquire();

private:
    using Clock = std::chrono::steady_clock;
    double per_second_;
    double tokens_ = 1.0;
    Clock::time_point last_ = Clock::now();
    std::mutex mutex_;
};

/// Shared entry point to one model backend: cache, per-key call coalescing,
/// in-flight cap, rate limiting and retries with exponential backoff.
class Gateway {
public:
    Gateway(ModelBackend backend, std::unique_ptr<CompletionTransport> transport,
            std::shared_ptr<ResponseCache> cache, RetryPolicy retry = {});

    /// Cache hit: no transport call. Miss: at most one transport call sequence per key,
    /// concurrent callers with the same key wait for it.
    std::string complete(const CompletionRequest& request);

    /// Request with the backend's default decoding parameters.
    CompletionRequest make_request(std::string prompt, std::string request_id = {}) const;

    const ModelBackend& backend() const { return backend_; }

    /// Transport attempts made so far (retries included).
    std::size_t transport_calls() const;

private:
    std::string call_backend(const CompletionRequest& request);

    ModelBackend backend_;
    std::unique_ptr<CompletionTransport> transport_;
    std::shared_ptr<ResponseCache> cache_;
    RetryPolicy retry_;
    std::unique_ptr<RateLimiter> limiter_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_future<std::string>> pending_;
    std::size_t transport_calls_ = 0;
};

std::unique_ptr<CompletionTransport> make_transport(const ModelBackend& backend);

std::unique_ptr<Gateway> make_gateway(const ModelBackend& backend,
                                      std::shared_ptr<ResponseCache> cache, RetryPolicy retry = {});

}  // namespace fsap
