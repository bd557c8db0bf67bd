#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fsap {

enum class Stance { helps, does_not_help };
enum class Dataset { trec2020, trec2021, synthetic };
enum class Provenance { human_helpful, human_harmful, adversarial };

std::string_view to_string(Stance s);
std::string_view to_string(Dataset d);
std::string_view to_string(Provenance p);
Stance parse_stance(std::string_view s);
Dataset parse_dataset(std::string_view s);
Provenance parse_provenance(std::string_view s);

constexpr Stance negate(Stance s) {
    return s == Stance::helps ? Stance::does_not_help : Stance::helps;
}

struct Topic {
    std::string topic_id;
    std::string query;
    std::string description;
    Stance stance = Stance::helps;
    Dataset dataset = Dataset::synthetic;
};

struct Document {
    std::string doc_id;
    std::string text;
    Provenance provenance = Provenance::human_helpful;
    /// Generation record id; set iff provenance is adversarial.
    std::optional<std::string> gen_record_id;
};

struct PreferenceJudgment {
    std::string topic_id;
    std::string doc_id;
    int preference_code = 0;
};

/// Re-ranking candidates for one topic. Adversarial documents are keyed by method id.
struct RankingPool {
    std::string topic_id;
    std::vector<Document> helpful;
    std::vector<Document> harmful;
    std::map<std::string, std::vector<Document>> adversarial;

    bool admitted() const { return !helpful.empty() && !harmful.empty(); }
};

/// doc_id -> text, as read from a documents file.
using DocumentStore = std::unordered_map<std::string, std::string>;

/// At most this many helpful and this many harmful documents enter a pool.
inline constexpr std::size_t kMaxPerSide = 10;

std::vector<Topic> load_topics(const std::filesystem::path& path);

/// JSONL records {topic_id, doc_id, preference_code}, or TREC qrels lines
/// `topic_id 0 doc_id code`. The format is detected per line.
std::vector<PreferenceJudgment> load_judgments(const std::filesystem::path& path);

DocumentStore load_documents(const std::filesystem::path& path);

/// Preference codes tried in priority order, most helpful (or most harmful) first.
std::span<const int> helpful_tiers(Dataset d);
std::span<const int> harmful_tiers(Dataset d);

/// Inclusive valid preference code range for a dataset.
std::pair<int, int> preference_code_range(Dataset d);

/// Greedy tier selection: whole tiers while they fit, a seeded uniform sample
/// from the first tier that overflows the remaining capacity. Candidates within
/// a tier are sorted by doc_id before sampling. Codes outside the tiers are ignored.
std::vector<Document> select_tiered(const Topic& topic,
                                    std::span<const PreferenceJudgment> judgments,
                                    const DocumentStore& docs, std::span<const int> tiers,
                                    Provenance provenance, std::uint64_t seed);

/// Builds the ranking pool for one topic; empty optional when the topic lacks
/// either helpful or harmful documents. `judgments` may contain other topics;
/// only records for `topic` are used.
std::optional<RankingPool> select_pool(const Topic& topic,
                                       std::span<const PreferenceJudgment> judgments,
                                       const DocumentStore& docs, std::uint64_t seed);

std::vector<RankingPool> filter_usable_topics(std::vector<std::optional<RankingPool>> pools);

}  // namespace fsap
