#include "fsap/remote_scorers.hpp"

#include <mutex>

#include "fsap/error.hpp"

namespace fsap {

namespace {

// Releases a semaphore slot on scope exit.
class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<>& sem_;
};

std::unique_ptr<std::counting_semaphore<>> make_slots(std::size_t n) {
    if (n == 0) throw ConfigError("max_in_flight must be positive");
    return std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(n));
}

}  // namespace

EmbeddingClient::EmbeddingClient(JsonPoster poster, std::string model, std::size_t max_in_flight,
                                 RetryPolicy retry)
    : poster_(std::move(poster)),
      model_(std::move(model)),
      retry_(std::move(retry)),
      in_flight_(make_slots(max_in_flight)) {}

std::vector<std::vector<double>> EmbeddingClient::embed(std::span<const std::string> texts) {
    std::vector<std::string> keys;
    keys.reserve(texts.size());
    for (const auto& t : texts) keys.push_back(sha256_hex(model_ + '\x1f' + t));

    std::vector<std::vector<double>> out(texts.size());
    std::vector<std::size_t> missing;
    {
        std::shared_lock lock(cache_mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto it = cache_.find(keys[i]); it != cache_.end()) {
                out[i] = it->second;
            } else {
                missing.push_back(i);
            }
        }
    }
    if (missing.empty()) return out;

    // Each distinct missing text is sent once.
    std::vector<std::string> inputs;
    std::unordered_map<std::string, std::size_t> slot_of;
    for (auto i : missing)
        if (slot_of.emplace(keys[i], inputs.size()).second) inputs.push_back(texts[i]);

    json response;
    {
        SlotGuard slot(*in_flight_);
        response = with_retries(retry_, [&] {
            {
                std::unique_lock lock(cache_mutex_);
                ++requests_;
            }
            return poster_.post(json{{"model", model_}, {"inputs", inputs}});
        });
    }
    if (!response.contains("vectors") || !response["vectors"].is_array())
        throw BackendError("embedding response lacks 'vectors'", false);
    const auto& vectors = response["vectors"];
    if (vectors.size() != inputs.size())
        throw BackendError("embedding response has " + std::to_string(vectors.size()) +
                               " vectors for " + std::to_string(inputs.size()) + " inputs",
                           false);
    std::vector<std::vector<double>> fresh;
    fresh.reserve(inputs.size());
    try {
        for (const auto& v : vectors) fresh.push_back(v.get<std::vector<double>>());
    } catch (const json::exception&) {
        throw BackendError("embedding vectors must be arrays of numbers", false);
    }

    std::unique_lock lock(cache_mutex_);
    for (auto i : missing) {
        const auto& vec = fresh[slot_of.at(keys[i])];
        cache_.try_emplace(keys[i], vec);
        out[i] = vec;
    }
    return out;
}

std::size_t EmbeddingClient::requests_sent() const {
    std::shared_lock lock(cache_mutex_);
    return requests_;
}

double embedding_pair_score(std::string_view query_repr, std::string_view chunk_text,
                            EmbeddingClient& client) {
    const std::string texts[] = {std::string(query_repr), std::string(chunk_text)};
    auto vectors = client.embed(texts);
    return cosine_similarity(vectors[0], vectors[1]);
}

std::vector<double> EmbeddingScorer::score_chunks(std::string_view query_repr,
                                                  std::span<const Chunk> chunks,
                                                  const CorpusStats&) {
    std::vector<std::string> texts;
    texts.reserve(chunks.size() + 1);
    texts.emplace_back(query_repr);
    for (const auto& c : chunks) texts.push_back(c.text);
    auto vectors = client_->embed(texts);
    std::vector<double> scores;
    scores.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i)
        scores.push_back(cosine_similarity(vectors[0], vectors[i + 1]));
    return scores;
}

CrossEncoderClient::CrossEncoderClient(JsonPoster poster, std::string model,
                                       std::size_t max_in_flight, RetryPolicy retry)
    : poster_(std::move(poster)),
      model_(std::move(model)),
      retry_(std::move(retry)),
      in_flight_(make_slots(max_in_flight)) {}

std::vector<double> CrossEncoderClient::score(std::string_view query,
                                              std::span<const std::string> passages) {
    json body{{"model", model_}, {"query", query}, {"passages", passages}};
    json response;
    {
        SlotGuard slot(*in_flight_);
        response = with_retries(retry_, [&] { return poster_.post(body); });
    }
    if (!response.contains("scores") || !response["scores"].is_array())
        throw BackendError("cross-encoder response lacks 'scores'", false);
    std::vector<double> scores;
    try {
        scores = response["scores"].get<std::vector<double>>();
    } catch (const json::exception&) {
        throw BackendError("cross-encoder scores must be numbers", false);
    }
    if (scores.size() != passages.size())
        throw BackendError("cross-encoder returned " + std::to_string(scores.size()) +
                               " scores for " + std::to_string(passages.size()) + " passages",
                           false);
    return scores;
}

std::vector<double> CrossEncoderScorer::score_chunks(std::string_view query_repr,
                                                     std::span<const Chunk> chunks,
                                                     const CorpusStats&) {
    std::vector<std::string> passages;
    passages.reserve(chunks.size());
    for (const auto& c : chunks) passages.push_back(c.text);
    return client_->score(query_repr, passages);
}

std::unique_ptr<ChunkScorer> make_scorer(const ScorerSpec& spec, const RetryPolicy& retry) {
    spec.validate();
    if (spec.kind == ScorerKind::lexical_bm25) return std::make_unique<Bm25Scorer>(spec.scorer_id, spec.bm25);

    std::optional<std::string> token;
    if (spec.api_key_env) token = credential_from_env(*spec.api_key_env);
    JsonPoster poster(Endpoint::parse(*spec.endpoint), token);
    if (spec.kind == ScorerKind::remote_embedding) {
        auto client = std::make_shared<EmbeddingClient>(std::move(poster), spec.model, spec.max_in_flight, retry);
        return std::make_unique<EmbeddingScorer>(spec.scorer_id, std::move(client));
    }
    auto client = std::make_shared<CrossEncoderClient>(std::move(poster), spec.model, spec.max_in_flight, retry);
    return std::make_unique<CrossEncoderScorer>(spec.scorer_id, std::move(client));
}

}  // namespace fsap
