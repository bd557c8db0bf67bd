#include "fsap/ranking.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "fsap/error.hpp"

namespace fsap {

namespace {

// Byte length of a Unicode whitespace sequence starting at s[i], or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
    auto byte = [&](std::size_t k) -> unsigned char {
        return k < s.size() ? static_cast<unsigned char>(s[k]) : 0;
    };
    unsigned char c = byte(i);
    if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
    if (c == 0xC2 && (byte(i + 1) == 0xA0 || byte(i + 1) == 0x85)) return 2;
    if (c == 0xE1 && byte(i + 1) == 0x9A && byte(i + 2) == 0x80) return 3;
    if (c == 0xE2 && byte(i + 1) == 0x80) {
        unsigned char d = byte(i + 2);
        if ((d >= 0x80 && d <= 0x8A) || d == 0xA8 || d == 0xA9 || d == 0xAF) return 3;
    }
    if (c == 0xE2 && byte(i + 1) == 0x81 && byte(i + 2) == 0x9F) return 3;
    if (c == 0xE3 && byte(i + 1) == 0x80 && byte(i + 2) == 0x80) return 3;
    return 0;
}

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

void flush_token(std::string& raw, std::vector<std::string>& out) {
    std::size_t b = 0, e = raw.size();
    while (b < e && is_punct(raw[b])) ++b;
    while (e > b && is_punct(raw[e - 1])) --e;
    if (e > b) {
        std::string tok = raw.substr(b, e - b);
        for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        out.push_back(std::move(tok));
    }
    raw.clear();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string raw;
    for (std::size_t i = 0; i < text.size();) {
        if (auto n = whitespace_len(text, i)) {
            flush_token(raw, out);
            i += n;
        } else {
            raw.push_back(text[i]);
            ++i;
        }
    }
    flush_token(raw, out);
    return out;
}

std::vector<Chunk> chunk(std::string_view doc_id, std::span<const std::string> tokens,
                         ChunkingOptions options) {
    if (options.size < 1 || options.stride < 1 || options.stride > options.size)
        throw std::invalid_argument("chunk: need size >= 1 and 1 <= stride <= size");
    std::vector<Chunk> chunks;
    const std::size_t n = tokens.size();
    for (std::size_t start = 0; start < n; start += options.stride) {
        const std::size_t end = std::min(start + options.size, n);
        Chunk c;
        c.parent_doc_id = std::string(doc_id);
        c.start_token = start;
        c.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                        tokens.begin() + static_cast<std::ptrdiff_t>(end));
        for (std::size_t i = 0; i < c.tokens.size(); ++i) {
            if (i) c.text.push_back(' ');
            c.text += c.tokens[i];
        }
        chunks.push_back(std::move(c));
        if (end == n) break;
    }
    return chunks;
}

std::string build_query_repr(const Topic& topic) {
    if (topic.query.empty()) return topic.description;
    if (topic.description.empty()) return topic.query;
    return topic.query + " " + topic.description;
}

CorpusStats CorpusStats::from_chunks(std::span<const Chunk> chunks) {
    CorpusStats stats;
    stats.num_chunks = chunks.size();
    std::size_t total = 0;
    for (const auto& c : chunks) {
        total += c.tokens.size();
        std::unordered_set<std::string_view> seen(c.tokens.begin(), c.tokens.end());
        for (auto term : seen) ++stats.doc_freq[std::string(term)];
    }
    stats.avg_len = chunks.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(chunks.size());
    return stats;
}

double bm25_pair_score(std::span<const std::string> query_tokens, const Chunk& chunk,
                       const CorpusStats& stats, Bm25Params params) {
    std::vector<std::string_view> terms(query_tokens.begin(), query_tokens.end());
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    const double n = static_cast<double>(stats.num_chunks);
    const double len = static_cast<double>(chunk.tokens.size());
    const double len_ratio = stats.avg_len > 0.0 ? len / stats.avg_len : 1.0;
    const double norm = params.k1 * (1.0 - params.b + params.b * len_ratio);

    double score = 0.0;
    for (auto term : terms) {
        auto tf = static_cast<double>(std::count(chunk.tokens.begin(), chunk.tokens.end(), term));
        if (tf == 0.0) continue;
        auto it = stats.doc_freq.find(std::string(term));
        const double df = it == stats.doc_freq.end() ? 0.0 : static_cast<double>(it->second);
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        score += idf * tf * (params.k1 + 1.0) / (tf + norm);
    }
    return score;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error("vector dimension mismatch: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string_view to_string(ScorerKind k) {
    switch (k) {
        case ScorerKind::lexical_bm25: return "LEXICAL_BM25";
        case ScorerKind::remote_embedding: return "REMOTE_EMBEDDING";
        case ScorerKind::remote_cross_encoder: return "REMOTE_CROSS_ENCODER";
    }
    return "?";
}

ScorerKind parse_scorer_kind(std::string_view s) {
    if (s == "LEXICAL_BM25") return ScorerKind::lexical_bm25;
    if (s == "REMOTE_EMBEDDING") return ScorerKind::remote_embedding;
    if (s == "REMOTE_CROSS_ENCODER") return ScorerKind::remote_cross_encoder;
    throw ConfigError("unknown scorer kind '" + std::string(s) + "'");
}

void ScorerSpec::validate() const {
    if (scorer_id.empty()) throw ConfigError("scorer_id must be nonempty");
    const bool remote = kind != ScorerKind::lexical_bm25;
    if (remote != endpoint.has_value())
        throw ConfigError("scorer " + scorer_id + ": endpoint must be set iff the scorer is remote");
    if (remote && model.empty()) throw ConfigError("scorer " + scorer_id + ": model is required");
    if (max_in_flight == 0) throw ConfigError("scorer " + scorer_id + ": max_in_flight must be > 0");
}

std::vector<double> Bm25Scorer::score_chunks(std::string_view query_repr,
                                             std::span<const Chunk> chunks,
                                             const CorpusStats& stats) {
    const auto query = tokenize(query_repr);
    std::vector<double> scores;
    scores.reserve(chunks.size());
    for (const auto& c : chunks) scores.push_back(bm25_pair_score(query, c, stats, params_));
    return scores;
}

std::size_t best_chunk(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

namespace {

ScoredDocument score_chunks_of(std::string_view query_repr, const std::string& doc_id,
                               std::span<const Chunk> chunks, ChunkScorer& scorer,
                               const CorpusStats& stats) {
    if (chunks.empty()) throw ScoringError(doc_id, "document has no tokens");
    std::vector<double> scores;
    try {
        scores = scorer.score_chunks(query_repr, chunks, stats);
    } catch (const ScoringError&) {
        throw;
    } catch (const std::exception& e) {
        throw ScoringError(doc_id, e.what());
    }
    if (scores.size() != chunks.size())
        throw ScoringError(doc_id, "scorer returned " + std::to_string(scores.size()) +
                                       " scores for " + std::to_string(chunks.size()) + " chunks");
    for (double s : scores)
        if (!std::isfinite(s)) throw ScoringError(doc_id, "non-finite score");
    const auto best = best_chunk(scores);
    return ScoredDocument{doc_id, scores[best], scorer.id(), chunks[best].start_token};
}

}  // namespace

ScoredDocument score_document(std::string_view query_repr, const Document& doc,
                              ChunkScorer& scorer, const CorpusStats& stats,
                              ChunkingOptions chunking) {
    const auto tokens = tokenize(doc.text);
    const auto chunks = chunk(doc.doc_id, tokens, chunking);
    return score_chunks_of(query_repr, doc.doc_id, chunks, scorer, stats);
}

void sort_ranked(std::vector<ScoredDocument>& docs) {
    std::sort(docs.begin(), docs.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
}

PoolScores score_pool(const Topic& topic, const RankingPool& pool, const std::string& method_id,
                      ChunkScorer& scorer, ChunkingOptions chunking, std::size_t workers) {
    if (!pool.admitted())
        throw Error("rank_pool: pool for topic " + pool.topic_id + " is not admitted");

    std::vector<const Document*> docs;
    for (const auto& d : pool.helpful) docs.push_back(&d);
    for (const auto& d : pool.harmful) docs.push_back(&d);
    if (auto it = pool.adversarial.find(method_id); it != pool.adversarial.end())
        for (const auto& d : it->second) docs.push_back(&d);

    std::vector<std::vector<Chunk>> chunks_per_doc;
    chunks_per_doc.reserve(docs.size());
    std::vector<Chunk> all_chunks;
    for (const auto* d : docs) {
        chunks_per_doc.push_back(chunk(d->doc_id, tokenize(d->text), chunking));
        all_chunks.insert(all_chunks.end(), chunks_per_doc.back().begin(), chunks_per_doc.back().end());
    }
    const auto stats = CorpusStats::from_chunks(all_chunks);
    const auto query_repr = build_query_repr(topic);

    std::vector<std::optional<ScoredDocument>> scored(docs.size());
    std::vector<std::optional<ScoringFailure>> failed(docs.size());
    parallel_for(docs.size(), workers, [&](std::size_t i) {
        try {
            scored[i] = score_chunks_of(query_repr, docs[i]->doc_id, chunks_per_doc[i], scorer, stats);
        } catch (const ScoringError& e) {
            failed[i] = ScoringFailure{e.doc_id(), e.reason()};
        }
    });

    PoolScores out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (scored[i]) out.ranked.push_back(std::move(*scored[i]));
        if (failed[i]) out.failures.push_back(std::move(*failed[i]));
    }
    sort_ranked(out.ranked);
    return out;
}

std::vector<ScoredDocument> rank_pool(const Topic& topic, const RankingPool& pool,
                                      const std::string& method_id, ChunkScorer& scorer,
                                      ChunkingOptions chunking, std::size_t workers) {
    auto result = score_pool(topic, pool, method_id, scorer, chunking, workers);
    if (!result.failures.empty()) {
        const auto& f = result.failures.front();
        throw ScoringError(f.doc_id, f.message);
    }
    return std::move(result.ranked);
}

}  // namespace fsap
