#pragma once

#include <memory>
#include <semaphore>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fsap/http.hpp"
#include "fsap/ranking.hpp"

namespace fsap {

/// Client for an embedding service: POST {model, inputs: [text]} -> {vectors: [[real]]}.
/// Vectors are cached by a digest of (model, text); the cache is shared by
/// concurrent callers. At most `max_in_flight` requests are outstanding.
class EmbeddingClient {
public:
    EmbeddingClient(JsonPoster poster, std::string model, std::size_t max_in_flight,
                    RetryPolicy retry = {});

    /// One vector per input, in input order. Only uncached texts are sent.
    std::vector<std::vector<double>> embed(std::span<const std::string> texts);

    std::size_t requests_sent() const;

private:
    JsonPoster poster_;
    std::string model_;
    RetryPolicy retry_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
    mutable std::shared_mutex cache_mutex_;
    std::unordered_map<std::string, std::vector<double>> cache_;
    std::size_t requests_ = 0;
};

/// Cosine similarity of the embeddings of two texts.
double embedding_pair_score(std::string_view query_repr, std::string_view chunk_text,
                            EmbeddingClient& client);

class EmbeddingScorer final : public ChunkScorer {
public:
    EmbeddingScorer(std::string id, std::shared_ptr<EmbeddingClient> client)
        : id_(std::move(id)), client_(std::move(client)) {}

    const std::string& id() const override { return id_; }
    std::vector<double> score_chunks(std::string_view query_repr, std::span<const Chunk> chunks,
                                     const CorpusStats& stats) override;

private:
    std::string id_;
    std::shared_ptr<EmbeddingClient> client_;
};

/// Client for a cross-encoder: POST {model, query, passages: [text]} -> {scores: [real]}.
class CrossEncoderClient {
public:
    CrossEncoderClient(JsonPoster poster, std::string model, std::size_t max_in_flight,
                       RetryPolicy retry = {});

    std::vector<double> score(std::string_view query, std::span<const std::string> passages);

private:
    JsonPoster poster_;
    std::string model_;
    RetryPolicy retry_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

class CrossEncoderScorer final : public ChunkScorer {
public:
    CrossEncoderScorer(std::string id, std::shared_ptr<CrossEncoderClient> client)
        : id_(std::move(id)), client_(std::move(client)) {}

    const std::string& id() const override { return id_; }
    std::vector<double> score_chunks(std::string_view query_repr, std::span<const Chunk> chunks,
                                     const CorpusStats& stats) override;

private:
    std::string id_;
    std::shared_ptr<CrossEncoderClient> client_;
};

}  // namespace fsap
