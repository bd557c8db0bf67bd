#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "fsap/corpus.hpp"
#include "fsap/judge.hpp"
#include "fsap/ranking.hpp"
#include "fsap/util.hpp"

namespace fsap {

/// Exact rational used for every rate.
using Fraction = boost::multiprecision::cpp_rational;

std::string to_string(const Fraction& f);  // "3/4", "1", "0"
Fraction parse_fraction(const std::string& s);
double to_double(const Fraction& f);
/// Percentage with one decimal, rounded half up: 3/4 -> "75.0".
std::string percent(const Fraction& f);

/// Fraction of helpful scores strictly below the adversarial score.
Fraction help_defeat_rate(std::span<const double> helpful_scores, double adversarial_score);

/// Arithmetic mean of per-document help-defeat rates.
Fraction mhdr(std::span<const Fraction> hdrs);
double mhdr(std::span<const double> hdrs);

struct AdversarialHdr {
    std::string doc_id;
    Fraction hdr;
};

struct HelpDefeatResult {
    std::string topic_id;
    std::string method_id;
    std::string scorer_id;
    std::vector<AdversarialHdr> per_adversarial;
    Fraction mhdr;
    std::size_t n_helpful = 0;
    std::size_t m_adversarial = 0;

    json to_json() const;
    static HelpDefeatResult from_json(const json& j);
};

/// Applies the help-defeat computation to raw scores of one ranked pool.
/// Throws if a helpful or `method_id` adversarial document has no score, or
/// the pool has no adversarial documents for the method.
HelpDefeatResult compute_pool_metrics(std::span<const ScoredDocument> ranked, const RankingPool& pool,
                                      const std::string& method_id, const std::string& scorer_id);

enum class Grouping { per_scorer, averaged_over_scorers };

inline constexpr const char* kAveragedScorer = "AVERAGED";

struct MetricsReport {
    std::string dataset;
    std::string method_id;
    std::string scorer_id;
    std::optional<std::size_t> k;
    Fraction mhdr_macro;
    std::optional<Fraction> stance_alignment_rate;  // empty when nothing parseable was judged
    std::optional<Fraction> detection_pass_rate;
    std::size_t topics = 0;
    std::size_t stance_judged = 0;
    std::size_t stance_unparseable = 0;
    std::size_t detection_judged = 0;
    std::size_t detection_unparseable = 0;
    std::size_t generation_failures = 0;
};

/// Macro (per-topic unweighted) MHDR per scorer, or the mean of those over
/// scorers. Judge rates use parseable verdicts of `results`' method only.
std::vector<MetricsReport> aggregate(std::span<const HelpDefeatResult> results,
                                     std::span<const JudgeVerdict> verdicts, Grouping grouping,
                                     const std::string& dataset, std::size_t generation_failures = 0);

struct SweepRow {
    std::size_t k = 0;
    std::string scorer_id;
    Fraction mhdr_macro;
    std::size_t topics = 0;
};

/// One row per (k, scorer), ascending k then scorer id. Throws when topic
/// coverage differs between support sizes.
std::vector<SweepRow> support_size_sweep(const std::map<std::size_t, std::vector<HelpDefeatResult>>& results_by_k);

/// dataset,method,scorer,k,mhdr,stance_alignment,detection_pass (percentages).
std::string reports_csv(std::span<const MetricsReport> reports);

/// mhdr,pass_rate,method for external plotting.
std::string scatter_csv(std::span<const MetricsReport> reports);

}  // namespace fsap
