#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsap/corpus.hpp"
#include "fsap/llm_gateway.hpp"
#include "fsap/templates.hpp"
#include "fsap/util.hpp"

namespace fsap {

enum class AttackMethod { fsap_intraq, fsap_interq, rewriter, paraphraser, fact_inversion, liar };

std::string_view to_string(AttackMethod m);
AttackMethod parse_attack_method(std::string_view s);
bool is_few_shot(AttackMethod m);
/// Template file name for a method, e.g. "fsap_interq".
std::string_view template_name(AttackMethod m);

struct AttackConfig {
    AttackMethod method = AttackMethod::fsap_interq;
    std::size_t k = 3;  // few-shot methods only
    std::uint64_t seed = 0;
};

enum class SupportMode { intra_query, inter_query };

struct SupportExample {
    std::string query_text;
    std::string harmful_doc_text;
    std::string source_topic_id;
    std::string source_doc_id;
};

struct SupportSet {
    SupportMode mode = SupportMode::intra_query;
    std::vector<SupportExample> examples;

    std::size_t k() const { return examples.size(); }
};

struct BuiltPrompt {
    std::string text;
    SupportSet support;
};

/// A harmful document together with the topic it was judged for.
struct SupportCandidate {
    Topic topic;
    Document doc;
};

/// "Query: {query}\nDocument: {document}\n\n"
std::string format_example(std::string_view query, std::string_view document);

/// Few-shot prompt from min(k, |harmful_docs|) of the target topic's own harmful documents.
BuiltPrompt build_intra_prompt(const PromptTemplate& tmpl, const Topic& topic,
                               std::span<const Document> harmful_docs, std::size_t k,
                               std::uint64_t seed);

/// Few-shot prompt from k harmful documents of k distinct topics other than the target.
BuiltPrompt build_inter_prompt(const PromptTemplate& tmpl, const Topic& topic,
                               std::span<const SupportCandidate> support_pool, std::size_t k,
                               std::uint64_t seed);

/// REWRITER and PARAPHRASER need a harmful seed document, FACT_INVERSION a
/// helpful one, LIAR none.
std::string build_baseline_prompt(const PromptTemplate& tmpl, AttackMethod method,
                                  const Topic& topic, const Document* seed_doc);

struct GenerationRecord {
    std::string record_id;
    std::string topic_id;
    AttackMethod method = AttackMethod::liar;
    std::size_t k = 0;
    std::string template_version;
    std::optional<std::string> source_doc_id;
    std::vector<SupportExample> support;  // texts are not persisted
    std::string prompt_hash;
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 0;
    std::string raw_output;
    std::string created_at;
    Stance adversarial_stance = Stance::helps;
    bool ok = true;
    std::string error;

    json to_json() const;
    static GenerationRecord from_json(const json& j);
};

/// Digest of the prompt text and decoding parameters.
std::string prompt_hash(std::string_view prompt, double temperature, int max_tokens);

struct GenerationContext {
    const TemplateLibrary& templates;
    Gateway& gateway;
    std::span<const SupportCandidate> support_pool;  // FSAP_INTERQ only
    TimestampSource clock = TimestampSource::wall_clock();
    std::size_t workers = 1;
};

/// One generation per helpful document of `pool`. Successful outputs are
/// appended to pool.adversarial[method id] as ADVERSARIAL documents whose
/// doc_id is the record id; backend failures yield records with ok = false.
/// Precondition violations throw.
std::vector<GenerationRecord> generate_for_pool(const Topic& topic, RankingPool& pool,
                                                const AttackConfig& config,
                                                const GenerationContext& context);

}  // namespace fsap
