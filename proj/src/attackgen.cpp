#include "fsap/attackgen.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "fsap/error.hpp"
#include "fsap/ranking.hpp"

namespace fsap {

namespace {

std::map<std::string, std::string> topic_fields(const Topic& topic) {
    return {{"query", topic.query},
            {"description", topic.description},
            {"stance", std::string(to_string(negate(topic.stance)))},
            {"query_repr", build_query_repr(topic)}};
}

std::string render_few_shot(const PromptTemplate& tmpl, const Topic& topic, const SupportSet& support) {
    auto values = topic_fields(topic);
    std::string examples;
    for (const auto& ex : support.examples) examples += format_example(ex.query_text, ex.harmful_doc_text);
    values["examples"] = std::move(examples);
    return tmpl.render(values);
}

std::string record_id_for(const Topic& topic, AttackMethod method, std::size_t index) {
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%03zu", index);
    return topic.topic_id + "/" + std::string(to_string(method)) + "/" + suffix;
}

}  // namespace

std::string_view to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::fsap_intraq: return "FSAP_INTRAQ";
        case AttackMethod::fsap_interq: return "FSAP_INTERQ";
        case AttackMethod::rewriter: return "REWRITER";
        case AttackMethod::paraphraser: return "PARAPHRASER";
        case AttackMethod::fact_inversion: return "FACT_INVERSION";
        case AttackMethod::liar: return "LIAR";
    }
    return "?";
}

AttackMethod parse_attack_method(std::string_view s) {
    for (auto m : {AttackMethod::fsap_intraq, AttackMethod::fsap_interq, AttackMethod::rewriter,
                   AttackMethod::paraphraser, AttackMethod::fact_inversion, AttackMethod::liar})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown attack method '" + std::string(s) + "'");
}

bool is_few_shot(AttackMethod m) { return m == AttackMethod::fsap_intraq || m == AttackMethod::fsap_interq; }

std::string_view template_name(AttackMethod m) {
    switch (m) {
        case AttackMethod::fsap_intraq: return "fsap_intraq";
        case AttackMethod::fsap_interq: return "fsap_interq";
        case AttackMethod::rewriter: return "rewriter";
        case AttackMethod::paraphraser: return "paraphraser";
        case AttackMethod::fact_inversion: return "fact_inversion";
        case AttackMethod::liar: return "liar";
    }
    return "?";
}

std::string format_example(std::string_view query, std::string_view document) {
    std::string out = "Query: ";
    out.append(query);
    out += "\nDocument: ";
    out.append(document);
    out += "\n\n";
    return out;
}

BuiltPrompt build_intra_prompt(const PromptTemplate& tmpl, const Topic& topic,
                               std::span<const Document> harmful_docs, std::size_t k,
                               std::uint64_t seed) {
    if (harmful_docs.empty()) throw Error("intra-query prompt for " + topic.topic_id + ": no harmful documents");
    if (k == 0) throw Error("support size k must be positive");

    std::vector<const Document*> sorted;
    for (const auto& d : harmful_docs) sorted.push_back(&d);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->doc_id < b->doc_id; });

    Rng rng(seed);
    BuiltPrompt out;
    out.support.mode = SupportMode::intra_query;
    for (auto i : sample_indices(sorted.size(), std::min(k, sorted.size()), rng))
        out.support.examples.push_back(
            SupportExample{topic.query, sorted[i]->text, topic.topic_id, sorted[i]->doc_id});
    out.text = render_few_shot(tmpl, topic, out.support);
    return out;
}

BuiltPrompt build_inter_prompt(const PromptTemplate& tmpl, const Topic& topic,
                               std::span<const SupportCandidate> support_pool, std::size_t k,
                               std::uint64_t seed) {
    if (k == 0) throw Error("support size k must be positive");
    std::map<std::string, std::vector<const SupportCandidate*>> by_topic;
    for (const auto& c : support_pool)
        if (c.topic.topic_id != topic.topic_id) by_topic[c.topic.topic_id].push_back(&c);
    if (by_topic.size() < k)
        throw Error("inter-query prompt for " + topic.topic_id + ": need " + std::to_string(k) +
                    " distinct non-target topics, support pool has " + std::to_string(by_topic.size()));

    std::vector<const std::vector<const SupportCandidate*>*> groups;
    for (auto& [id, group] : by_topic) {
        std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->doc.doc_id < b->doc.doc_id; });
        groups.push_back(&group);
    }

    Rng rng(seed);
    BuiltPrompt out;
    out.support.mode = SupportMode::inter_query;
    for (auto g : sample_indices(groups.size(), k, rng)) {
        const auto& group = *groups[g];
        const auto* pick = group[static_cast<std::size_t>(rng.below(group.size()))];
        out.support.examples.push_back(
            SupportExample{pick->topic.query, pick->doc.text, pick->topic.topic_id, pick->doc.doc_id});
    }
    out.text = render_few_shot(tmpl, topic, out.support);
    return out;
}

std::string build_baseline_prompt(const PromptTemplate& tmpl, AttackMethod method,
                                  const Topic& topic, const Document* seed_doc) {
    auto values = topic_fields(topic);
    switch (method) {
        case AttackMethod::rewriter:
        case AttackMethod::paraphraser:
            if (!seed_doc || seed_doc->provenance != Provenance::human_harmful)
                throw Error(std::string(to_string(method)) + " requires a harmful seed document");
            values["seed_document"] = seed_doc->text;
            break;
        case AttackMethod::fact_inversion:
            if (!seed_doc || seed_doc->provenance != Provenance::human_helpful)
                throw Error("FACT_INVERSION requires a helpful seed document");
            values["seed_document"] = seed_doc->text;
            break;
        case AttackMethod::liar:
            break;
        default:
            throw std::invalid_argument("build_baseline_prompt: few-shot methods have their own builders");
    }
    return tmpl.render(values);
}

std::string prompt_hash(std::string_view prompt, double temperature, int max_tokens) {
    return sha256_hex(json{{"prompt", prompt}, {"temperature", temperature}, {"max_tokens", max_tokens}}.dump());
}

json GenerationRecord::to_json() const {
    json support_ids = json::array();
    for (const auto& ex : support)
        support_ids.push_back(json{{"source_topic_id", ex.source_topic_id}, {"doc_id", ex.source_doc_id}});
    return json{{"record_id", record_id},
                {"topic_id", topic_id},
                {"method", to_string(method)},
                {"k", k},
                {"template_version", template_version},
                {"source_doc_id", source_doc_id ? json(*source_doc_id) : json(nullptr)},
                {"support", support_ids},
                {"prompt_hash", prompt_hash},
                {"model_id", model_id},
                {"temperature", temperature},
                {"max_tokens", max_tokens},
                {"raw_output", raw_output},
                {"created_at", created_at},
                {"adversarial_stance", to_string(adversarial_stance)},
                {"status", ok ? "ok" : "failed"},
                {"error", error}};
}

GenerationRecord GenerationRecord::from_json(const json& j) {
    GenerationRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.topic_id = j.at("topic_id").get<std::string>();
    r.method = parse_attack_method(j.at("method").get<std::string>());
    r.k = j.at("k").get<std::size_t>();
    r.template_version = j.at("template_version").get<std::string>();
    if (!j.at("source_doc_id").is_null()) r.source_doc_id = j.at("source_doc_id").get<std::string>();
    for (const auto& s : j.at("support"))
        r.support.push_back(SupportExample{{}, {}, s.at("source_topic_id").get<std::string>(),
                                           s.at("doc_id").get<std::string>()});
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.max_tokens = j.at("max_tokens").get<int>();
    r.raw_output = j.at("raw_output").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    r.adversarial_stance = parse_stance(j.at("adversarial_stance").get<std::string>());
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.value("error", "");
    return r;
}

std::vector<GenerationRecord> generate_for_pool(const Topic& topic, RankingPool& pool,
                                                const AttackConfig& config,
                                                const GenerationContext& context) {
    if (!pool.admitted()) throw Error("generate_for_pool: pool for " + topic.topic_id + " is not admitted");
    if (pool.topic_id != topic.topic_id) throw Error("generate_for_pool: pool/topic mismatch");
    const auto& tmpl = context.templates.get(template_name(config.method));
    const std::size_t n = pool.helpful.size();

    // Prompts are built up front so precondition failures surface before any backend call.
    std::vector<BuiltPrompt> prompts(n);
    std::vector<std::optional<std::string>> seed_doc_ids(n);
    const std::size_t cyclic_offset =
        static_cast<std::size_t>(Rng(derive_seed(config.seed, topic.topic_id + "/cyclic")).below(pool.harmful.size()));
    for (std::size_t i = 0; i < n; ++i) {
        const auto sub_seed = derive_seed(config.seed, topic.topic_id + "#" + std::to_string(i));
        switch (config.method) {
            case AttackMethod::fsap_intraq:
                prompts[i] = build_intra_prompt(tmpl, topic, pool.harmful, config.k, sub_seed);
                break;
            case AttackMethod::fsap_interq:
                prompts[i] = build_inter_prompt(tmpl, topic, context.support_pool, config.k, sub_seed);
                break;
            case AttackMethod::fact_inversion:
                prompts[i].text = build_baseline_prompt(tmpl, config.method, topic, &pool.helpful[i]);
                seed_doc_ids[i] = pool.helpful[i].doc_id;
                break;
            case AttackMethod::rewriter:
            case AttackMethod::paraphraser: {
                const auto& seed_doc = pool.harmful[(cyclic_offset + i) % pool.harmful.size()];
                prompts[i].text = build_baseline_prompt(tmpl, config.method, topic, &seed_doc);
                seed_doc_ids[i] = seed_doc.doc_id;
                break;
            }
            case AttackMethod::liar:
                prompts[i].text = build_baseline_prompt(tmpl, config.method, topic, nullptr);
                break;
        }
    }

    std::vector<GenerationRecord> records(n);
    parallel_for(n, context.workers, [&](std::size_t i) {
        auto& r = records[i];
        r.record_id = record_id_for(topic, config.method, i);
        r.topic_id = topic.topic_id;
        r.method = config.method;
        r.k = is_few_shot(config.method) ? prompts[i].support.k() : 0;
        r.template_version = tmpl.version;
        r.source_doc_id = seed_doc_ids[i];
        r.support = prompts[i].support.examples;
        r.model_id = context.gateway.backend().model_name;
        r.adversarial_stance = negate(topic.stance);
        auto request = context.gateway.make_request(prompts[i].text, r.record_id);
        r.temperature = request.temperature;
        r.max_tokens = request.max_tokens;
        r.prompt_hash = prompt_hash(request.prompt, request.temperature, request.max_tokens);
        try {
            r.raw_output = context.gateway.complete(request);
            if (tokenize(r.raw_output).empty()) {
                r.ok = false;
                r.error = "empty generation";
            }
        } catch (const BackendError& e) {
            r.ok = false;
            r.error = e.what();
        }
        r.created_at = context.clock.now();
    });

    auto& adversarial = pool.adversarial[std::string(to_string(config.method))];
    for (const auto& r : records)
        if (r.ok) adversarial.push_back(Document{r.record_id, r.raw_output, Provenance::adversarial, r.record_id});
    return records;
}

}  // namespace fsap
