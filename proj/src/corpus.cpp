#include "fsap/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "fsap/error.hpp"
#include "fsap/util.hpp"

namespace fsap {

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

// Topic and doc ids are strings, but qrels-derived JSON often carries them as numbers.
std::string id_field(const json& record, const char* key) {
    const auto& v = record.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw std::invalid_argument(std::string("field ") + key + " must be a string");
}

std::string text_field(const json& record, const char* key) {
    if (!record.contains(key)) throw std::invalid_argument(std::string("missing field ") + key);
    const auto& v = record.at(key);
    if (!v.is_string()) throw std::invalid_argument(std::string("field ") + key + " must be a string");
    return v.get<std::string>();
}

constexpr int kTrec2020Helpful[] = {4};
constexpr int kTrec2020Harmful[] = {-2};
constexpr int kTrec2021Helpful[] = {12, 11, 10, 9};
constexpr int kTrec2021Harmful[] = {-3, -2};

}  // namespace

std::string_view to_string(Stance s) { return s == Stance::helps ? "HELPS" : "DOES_NOT_HELP"; }

std::string_view to_string(Dataset d) {
    switch (d) {
        case Dataset::trec2020: return "TREC2020";
        case Dataset::trec2021: return "TREC2021";
        case Dataset::synthetic: return "SYNTHETIC";
    }
    return "?";
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::human_helpful: return "HUMAN_HELPFUL";
        case Provenance::human_harmful: return "HUMAN_HARMFUL";
        case Provenance::adversarial: return "ADVERSARIAL";
    }
    return "?";
}

Stance parse_stance(std::string_view s) {
    auto u = upper(s);
    if (u == "HELPS") return Stance::helps;
    if (u == "DOES_NOT_HELP") return Stance::does_not_help;
    throw std::invalid_argument("unknown stance '" + std::string(s) + "'");
}

Dataset parse_dataset(std::string_view s) {
    auto u = upper(s);
    if (u == "TREC2020") return Dataset::trec2020;
    if (u == "TREC2021") return Dataset::trec2021;
    if (u == "SYNTHETIC") return Dataset::synthetic;
    throw std::invalid_argument("unknown dataset '" + std::string(s) + "'");
}

Provenance parse_provenance(std::string_view s) {
    auto u = upper(s);
    if (u == "HUMAN_HELPFUL") return Provenance::human_helpful;
    if (u == "HUMAN_HARMFUL") return Provenance::human_harmful;
    if (u == "ADVERSARIAL") return Provenance::adversarial;
    throw std::invalid_argument("unknown provenance '" + std::string(s) + "'");
}

std::vector<Topic> load_topics(const std::filesystem::path& path) {
    std::vector<Topic> topics;
    std::unordered_set<std::string> seen;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        Topic t;
        try {
            if (!r.contains("topic_id")) throw std::invalid_argument("missing field topic_id");
            t.topic_id = id_field(r, "topic_id");
            t.query = text_field(r, "query");
            t.description = text_field(r, "description");
            t.stance = parse_stance(text_field(r, "stance"));
            t.dataset = parse_dataset(text_field(r, "dataset"));
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
        if (t.topic_id.empty()) throw ParseError(path.string(), line, "empty topic_id");
        if (t.query.empty() || t.description.empty())
            throw ParseError(path.string(), line, "query and description must be nonempty");
        if (!seen.insert(t.topic_id).second)
            throw ParseError(path.string(), line, "duplicate topic_id " + t.topic_id);
        topics.push_back(std::move(t));
    });
    return topics;
}

std::vector<PreferenceJudgment> load_judgments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<PreferenceJudgment> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        PreferenceJudgment j;
        if (line[first] == '{') {
            try {
                auto r = json::parse(line);
                if (!r.contains("topic_id") || !r.contains("doc_id") || !r.contains("preference_code"))
                    throw std::invalid_argument("expected topic_id, doc_id, preference_code");
                j.topic_id = id_field(r, "topic_id");
                j.doc_id = id_field(r, "doc_id");
                j.preference_code = r.at("preference_code").get<int>();
            } catch (const std::exception& e) {
                throw ParseError(path.string(), line_no, e.what());
            }
        } else {
            std::istringstream fields(line);
            std::string iteration, code, extra;
            if (!(fields >> j.topic_id >> iteration >> j.doc_id >> code) || (fields >> extra))
                throw ParseError(path.string(), line_no, "expected `topic_id 0 doc_id code`");
            try {
                std::size_t used = 0;
                j.preference_code = std::stoi(code, &used);
                if (used != code.size()) throw std::invalid_argument(code);
            } catch (const std::exception&) {
                throw ParseError(path.string(), line_no, "non-integer preference code '" + code + "'");
            }
        }
        out.push_back(std::move(j));
    }
    return out;
}

DocumentStore load_documents(const std::filesystem::path& path) {
    DocumentStore docs;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        std::string id, text;
        try {
            if (!r.contains("doc_id")) throw std::invalid_argument("missing field doc_id");
            id = id_field(r, "doc_id");
            text = text_field(r, "text");
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
        if (id.empty() || text.empty()) throw ParseError(path.string(), line, "empty doc_id or text");
        if (!docs.emplace(id, std::move(text)).second)
            throw ParseError(path.string(), line, "duplicate doc_id " + id);
    });
    return docs;
}

std::span<const int> helpful_tiers(Dataset d) {
    if (d == Dataset::trec2021) return kTrec2021Helpful;
    return kTrec2020Helpful;
}

std::span<const int> harmful_tiers(Dataset d) {
    if (d == Dataset::trec2021) return kTrec2021Harmful;
    return kTrec2020Harmful;
}

std::pair<int, int> preference_code_range(Dataset d) {
    if (d == Dataset::trec2021) return {-3, 12};
    return {-2, 4};
}

std::vector<Document> select_tiered(const Topic& topic,
                                    std::span<const PreferenceJudgment> judgments,
                                    const DocumentStore& docs, std::span<const int> tiers,
                                    Provenance provenance, std::uint64_t seed) {
    const auto [lo, hi] = preference_code_range(topic.dataset);
    std::map<std::string, int> code_of;
    for (const auto& j : judgments) {
        if (j.topic_id != topic.topic_id) continue;
        if (j.preference_code < lo || j.preference_code > hi)
            throw Error("topic " + topic.topic_id + ": preference code " +
                        std::to_string(j.preference_code) + " for " + j.doc_id +
                        " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        auto [it, inserted] = code_of.emplace(j.doc_id, j.preference_code);
        if (!inserted && it->second != j.preference_code)
            throw Error("topic " + topic.topic_id + ": conflicting codes for " + j.doc_id);
    }

    Rng rng(derive_seed(seed, topic.topic_id + "/" + std::string(to_string(provenance))));
    std::vector<Document> selected;
    for (int tier : tiers) {
        if (selected.size() >= kMaxPerSide) break;
        // code_of is ordered by doc_id, so candidates come out sorted.
        std::vector<std::string> candidates;
        for (const auto& [doc_id, code] : code_of)
            if (code == tier) candidates.push_back(doc_id);

        const std::size_t room = kMaxPerSide - selected.size();
        std::vector<std::string> taken;
        if (candidates.size() <= room) {
            taken = std::move(candidates);
        } else {
            auto picks = sample_indices(candidates.size(), room, rng);
            std::sort(picks.begin(), picks.end());
            for (auto i : picks) taken.push_back(candidates[i]);
        }
        for (auto& doc_id : taken) {
            auto it = docs.find(doc_id);
            if (it == docs.end())
                throw Error("topic " + topic.topic_id + ": unresolvable doc_id " + doc_id);
            selected.push_back(Document{doc_id, it->second, provenance, std::nullopt});
        }
    }
    return selected;
}

std::optional<RankingPool> select_pool(const Topic& topic,
                                       std::span<const PreferenceJudgment> judgments,
                                       const DocumentStore& docs, std::uint64_t seed) {
    RankingPool pool;
    pool.topic_id = topic.topic_id;
    pool.helpful = select_tiered(topic, judgments, docs, helpful_tiers(topic.dataset),
                                 Provenance::human_helpful, seed);
    pool.harmful = select_tiered(topic, judgments, docs, harmful_tiers(topic.dataset),
                                 Provenance::human_harmful, seed);
    if (!pool.admitted()) return std::nullopt;
    return pool;
}

std::vector<RankingPool> filter_usable_topics(std::vector<std::optional<RankingPool>> pools) {
    std::vector<RankingPool> out;
    for (auto& p : pools)
        if (p) out.push_back(std::move(*p));
    return out;
}

}  // namespace fsap
