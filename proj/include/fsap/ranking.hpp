#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fsap/corpus.hpp"
#include "fsap/util.hpp"

namespace fsap {

/// Lowercases, splits on whitespace (ASCII and common Unicode spaces) and
/// trims leading/trailing punctuation from each token. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view text);

struct Chunk {
    std::string parent_doc_id;
    std::size_t start_token = 0;
    std::vector<std::string> tokens;
    std::string text;
};

struct ChunkingOptions {
    std::size_t size = 512;
    std::size_t stride = 256;
};

/// Sliding windows starting at 0, stride, 2*stride, ... Each window holds
/// min(size, remaining) tokens; generation stops once a window reaches the
/// last token. No tokens, no chunks.
std::vector<Chunk> chunk(std::string_view doc_id, std::span<const std::string> tokens,
                         ChunkingOptions options = {});

/// Query text used for ranking: query and description joined by one space.
std::string build_query_repr(const Topic& topic);

/// Chunk-level collection statistics for BM25.
struct CorpusStats {
    std::size_t num_chunks = 0;
    double avg_len = 0.0;
    std::unordered_map<std::string, std::size_t> doc_freq;

    static CorpusStats from_chunks(std::span<const Chunk> chunks);
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

double bm25_pair_score(std::span<const std::string> query_tokens, const Chunk& chunk,
                       const CorpusStats& stats, Bm25Params params = {});

/// Cosine similarity; throws Error on dimension mismatch. Zero vectors score 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

enum class ScorerKind { lexical_bm25, remote_embedding, remote_cross_encoder };

std::string_view to_string(ScorerKind k);
ScorerKind parse_scorer_kind(std::string_view s);

struct ScorerSpec {
    std::string scorer_id;
    ScorerKind kind = ScorerKind::lexical_bm25;
    std::optional<std::string> endpoint;  // required iff remote
    std::string model;
    Bm25Params bm25;
    std::optional<std::string> api_key_env;
    std::size_t max_in_flight = 4;

    void validate() const;
};

struct ScoredDocument {
    std::string doc_id;
    double score = 0.0;
    std::string scorer_id;
    std::size_t best_chunk_start = 0;
};

/// Scores the chunks of one document against a query. `stats` covers every
/// chunk of the pool being ranked; remote scorers ignore it.
/// Implementations must be safe to call concurrently.
class ChunkScorer {
public:
    virtual ~ChunkScorer() = default;

    virtual const std::string& id() const = 0;
    virtual std::vector<double> score_chunks(std::string_view query_repr,
                                             std::span<const Chunk> chunks,
                                             const CorpusStats& stats) = 0;
};

class Bm25Scorer final : public ChunkScorer {
public:
    Bm25Scorer(std::string id, Bm25Params params) : id_(std::move(id)), params_(params) {}

    const std::string& id() const override { return id_; }
    std::vector<double> score_chunks(std::string_view query_repr, std::span<const Chunk> chunks,
                                     const CorpusStats& stats) override;

private:
    std::string id_;
    Bm25Params params_;
};

struct RetryPolicy;

/// Builds the scorer named by `spec` (remote kinds read credentials from the environment).
std::unique_ptr<ChunkScorer> make_scorer(const ScorerSpec& spec, const RetryPolicy& retry);

/// Index of the maximum score; ties go to the earliest chunk.
std::size_t best_chunk(std::span<const double> scores);

/// Max-over-chunks document score. Throws ScoringError (with the doc id) on
/// an empty document, a backend failure or a non-finite score.
ScoredDocument score_document(std::string_view query_repr, const Document& doc,
                              ChunkScorer& scorer, const CorpusStats& stats,
                              ChunkingOptions chunking = {});

/// Orders by score descending, then doc_id ascending.
void sort_ranked(std::vector<ScoredDocument>& docs);

struct ScoringFailure {
    std::string doc_id;
    std::string message;
};

struct PoolScores {
    std::vector<ScoredDocument> ranked;
    std::vector<ScoringFailure> failures;
};

/// Like rank_pool, but a document that fails to score is reported in
/// `failures` and left out of `ranked` instead of aborting the pool.
PoolScores score_pool(const Topic& topic, const RankingPool& pool, const std::string& method_id,
                      ChunkScorer& scorer, ChunkingOptions chunking = {}, std::size_t workers = 1);

/// Scores every helpful, harmful and `method_id` adversarial document of an
/// admitted pool and returns them ranked. The first scoring failure is thrown. BM25 statistics are computed over
/// the chunks of exactly those documents.
std::vector<ScoredDocument> rank_pool(const Topic& topic, const RankingPool& pool,
                                      const std::string& method_id, ChunkScorer& scorer,
                                      ChunkingOptions chunking = {}, std::size_t workers = 1);

}  // namespace fsap
