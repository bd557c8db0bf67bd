#include "fsap/pipeline.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <unordered_map>

#include "fsap/error.hpp"
#include "fsap/judge.hpp"
#include "fsap/metrics.hpp"
#include "fsap/templates.hpp"

namespace fsap {

namespace fs = std::filesystem;

namespace {

void log(const std::string& message) { std::cerr << "[fsap] " << message << '\n'; }

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

ModelBackend parse_backend(const json& j, const std::string& where) {
    check_keys(j, {"id", "kind", "endpoint", "model", "behavior", "fixed_text", "temperature", "max_tokens",
                   "api_key_env", "requests_per_minute", "max_in_flight"},
               where);
    ModelBackend b;
    b.backend_id = j.at("id").get<std::string>();
    b.kind = parse_backend_kind(j.value("kind", "MOCK"));
    if (j.contains("endpoint")) b.endpoint = j.at("endpoint").get<std::string>();
    b.model_name = j.at("model").get<std::string>();
    if (j.contains("behavior")) b.mock_behavior = parse_mock_behavior(j.at("behavior").get<std::string>());
    b.fixed_text = j.value("fixed_text", "");
    b.defaults.temperature = j.value("temperature", 0.7);
    b.defaults.max_tokens = j.value("max_tokens", 1024);
    if (j.contains("api_key_env")) b.api_key_env = j.at("api_key_env").get<std::string>();
    b.requests_per_minute = j.value("requests_per_minute", b.kind == BackendKind::mock ? 0.0 : 30.0);
    b.max_in_flight = j.value("max_in_flight", std::size_t{4});
    b.validate();
    return b;
}

ScorerSpec parse_scorer(const json& j) {
    const std::string where = "scorer " + j.value("id", std::string("?"));
    check_keys(j, {"id", "kind", "endpoint", "model", "k1", "b", "api_key_env", "max_in_flight"}, where);
    ScorerSpec s;
    s.scorer_id = j.at("id").get<std::string>();
    s.kind = parse_scorer_kind(j.value("kind", "LEXICAL_BM25"));
    if (j.contains("endpoint")) s.endpoint = j.at("endpoint").get<std::string>();
    s.model = j.value("model", "");
    s.bm25.k1 = j.value("k1", 1.2);
    s.bm25.b = j.value("b", 0.75);
    if (j.contains("api_key_env")) s.api_key_env = j.at("api_key_env").get<std::string>();
    s.max_in_flight = j.value("max_in_flight", std::size_t{4});
    s.validate();
    return s;
}

json doc_list(const std::vector<Document>& docs) {
    json out = json::array();
    for (const auto& d : docs) out.push_back(json{{"doc_id", d.doc_id}, {"text", d.text}});
    return out;
}

std::vector<Document> parse_docs(const json& list, Provenance provenance) {
    std::vector<Document> out;
    for (const auto& d : list)
        out.push_back(Document{d.at("doc_id").get<std::string>(), d.at("text").get<std::string>(), provenance,
                               std::nullopt});
    return out;
}

void require_file(const fs::path& path, const std::string& hint) {
    if (!fs::exists(path)) throw Error("missing upstream file " + path.string() + " (" + hint + ")");
}

struct Inputs {
    std::vector<Topic> topics;
    std::unordered_map<std::string, const Topic*> by_id;
    std::vector<RankingPool> pools;

    const Topic& topic(const std::string& id) const {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("unknown topic " + id);
        return *it->second;
    }
};

Inputs load_inputs(const RunConfig& config) {
    Inputs in;
    in.topics = load_topics(config.topics);
    for (const auto& t : in.topics) in.by_id.emplace(t.topic_id, &t);
    require_file(artifacts::pools_file(config.output_dir), "run build-pools first");
    in.pools = artifacts::load_pools(artifacts::pools_file(config.output_dir));
    return in;
}

std::string dataset_label(const Inputs& in) {
    std::set<std::string_view> names;
    for (const auto& p : in.pools) names.insert(to_string(in.topic(p.topic_id).dataset));
    if (names.size() == 1) return std::string(*names.begin());
    return "MIXED";
}

void attach_adversarial(std::vector<RankingPool>& pools, const std::vector<GenerationRecord>& records,
                        AttackMethod method) {
    std::unordered_map<std::string, RankingPool*> by_topic;
    for (auto& p : pools) by_topic.emplace(p.topic_id, &p);
    const std::string key(to_string(method));
    for (const auto& r : records) {
        if (!r.ok) continue;
        auto it = by_topic.find(r.topic_id);
        if (it == by_topic.end()) throw Error("generation " + r.record_id + " refers to a topic without a pool");
        it->second->adversarial[key].push_back(
            Document{r.record_id, r.raw_output, Provenance::adversarial, r.record_id});
    }
}

std::vector<AttackConfig> selected_methods(const RunConfig& config, std::optional<AttackMethod> only) {
    std::vector<AttackConfig> out;
    for (const auto& m : config.methods)
        if (!only || m.method == *only) out.push_back(m);
    if (out.empty()) throw ConfigError("no configured attack method matches the selection");
    return out;
}

std::vector<ScorerSpec> selected_scorers(const RunConfig& config, const std::optional<std::string>& only) {
    std::vector<ScorerSpec> out;
    for (const auto& s : config.scorers)
        if (!only || s.scorer_id == *only) out.push_back(s);
    if (out.empty()) throw ConfigError("no configured scorer matches the selection");
    return out;
}

std::size_t sum_lines(const fs::path& dir, bool failures) {
    if (!fs::exists(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (!name.ends_with(".jsonl")) continue;
        if (name.ends_with(".failures.jsonl") != failures) continue;
        n += count_lines(e.path());
    }
    return n;
}

std::size_t failed_generations(const fs::path& dir) {
    if (!fs::exists(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".jsonl") continue;
        for (const auto& r : artifacts::load_generations(e.path())) n += r.ok ? 0 : 1;
    }
    return n;
}

void update_manifest(const RunConfig& config, const std::string& stage, const std::string& status) {
    const auto& out = config.output_dir;
    const auto path = artifacts::manifest_file(out);
    RunManifest m;
    if (fs::exists(path)) m = RunManifest::from_json(json::parse(read_file(path)));
    m.run_id = "run-" + config.digest.substr(0, 12);
    m.config_digest = config.digest;
    m.tool_version = FSAP_VERSION;
    m.stages[stage] = status;
    m.counts["topics"] = count_lines(config.topics);
    m.counts["pools"] = count_lines(artifacts::pools_file(out));
    m.counts["generations"] = sum_lines(out / "generations", false);
    m.counts["generation_failures"] = failed_generations(out / "generations");
    m.counts["scores"] = sum_lines(out / "scores", false);
    m.counts["scoring_failures"] = sum_lines(out / "scores", true);
    m.counts["verdicts"] = sum_lines(out / "verdicts", false);
    write_file_atomic(path, m.to_json().dump(2) + "\n");
}

std::shared_ptr<ResponseCache> open_cache(const RunConfig& config) {
    return std::make_shared<ResponseCache>(config.cache_dir, config.clock());
}

struct StageOutcome {
    std::size_t items = 0;
    std::size_t failures = 0;
};

StageOutcome attack_stage(const RunConfig& config, const Inputs& in, const std::vector<SupportCandidate>& support,
                          const fs::path& stage, const std::vector<AttackConfig>& methods,
                          std::shared_ptr<ResponseCache> cache) {
    const auto templates = TemplateLibrary::load(config.templates_dir, config.template_version);
    auto gateway = make_gateway(config.generator, cache, config.retry);
    GenerationContext ctx{templates, *gateway, support, config.clock(), config.concurrency.generation};

    StageOutcome outcome;
    for (const auto& method : methods) {
        std::vector<json> lines;
        for (auto pool : in.pools) {
            for (const auto& r : generate_for_pool(in.topic(pool.topic_id), pool, method, ctx)) {
                outcome.failures += r.ok ? 0 : 1;
                lines.push_back(r.to_json());
            }
        }
        outcome.items += lines.size();
        write_file_atomic(artifacts::generations_file(stage, method.method), to_jsonl(lines));
        log(std::string(to_string(method.method)) + ": " + std::to_string(lines.size()) + " generation records");
    }
    cache->flush();
    return outcome;
}

StageOutcome score_stage(const RunConfig& config, const Inputs& in, const fs::path& stage,
                         const std::vector<AttackConfig>& methods, const std::vector<ScorerSpec>& scorers) {
    StageOutcome outcome;
    for (const auto& method : methods) {
        const auto gen_path = artifacts::generations_file(stage, method.method);
        require_file(gen_path, "run attack first");
        auto pools = in.pools;
        attach_adversarial(pools, artifacts::load_generations(gen_path), method.method);
        const std::string method_id(to_string(method.method));

        for (const auto& spec : scorers) {
            auto scorer = make_scorer(spec, config.retry);
            std::vector<json> lines, failures;
            for (const auto& pool : pools) {
                auto ps = score_pool(in.topic(pool.topic_id), pool, method_id, *scorer, config.chunking,
                                     config.concurrency.scoring);
                std::unordered_map<std::string, std::string> role;
                for (const auto& d : pool.helpful) role[d.doc_id] = "helpful";
                for (const auto& d : pool.harmful) role[d.doc_id] = "harmful";
                std::size_t rank = 0;
                for (const auto& s : ps.ranked) {
                    const auto r = role.find(s.doc_id);
                    lines.push_back(json{{"topic_id", pool.topic_id},
                                         {"doc_id", s.doc_id},
                                         {"role", r == role.end() ? "adversarial" : r->second},
                                         {"scorer", s.scorer_id},
                                         {"score", s.score},
                                         {"best_chunk_start", s.best_chunk_start},
                                         {"rank", ++rank}});
                }
                for (const auto& f : ps.failures)
                    failures.push_back(json{{"topic_id", pool.topic_id}, {"doc_id", f.doc_id}, {"error", f.message}});
            }
            outcome.items += lines.size();
            outcome.failures += failures.size();
            const auto path = artifacts::scores_file(stage, method.method, spec.scorer_id);
            write_file_atomic(path, to_jsonl(lines));
            auto failure_path = path;
            failure_path.replace_extension(".failures.jsonl");
            if (failures.empty()) {
                fs::remove(failure_path);
            } else {
                write_file_atomic(failure_path, to_jsonl(failures));
                log(method_id + " / " + spec.scorer_id + ": " + std::to_string(failures.size()) +
                    " documents failed to score");
            }
        }
    }
    return outcome;
}

struct Evaluation {
    std::map<AttackMethod, std::vector<HelpDefeatResult>> results;
    std::vector<MetricsReport> per_scorer;
    std::vector<MetricsReport> averaged;
    std::size_t skipped_topics = 0;
};

Evaluation evaluate_stage(const RunConfig& config, const Inputs& in, const fs::path& stage,
                          const std::vector<AttackConfig>& methods, bool use_verdicts) {
    Evaluation ev;
    const auto dataset = dataset_label(in);
    for (const auto& method : methods) {
        const auto gen_path = artifacts::generations_file(stage, method.method);
        require_file(gen_path, "run attack first");
        const auto records = artifacts::load_generations(gen_path);
        std::size_t generation_failures = 0;
        for (const auto& r : records) generation_failures += r.ok ? 0 : 1;
        auto pools = in.pools;
        attach_adversarial(pools, records, method.method);
        const std::string method_id(to_string(method.method));

        std::vector<JudgeVerdict> verdicts;
        const auto verdict_path = artifacts::verdicts_file(stage, method.method);
        if (use_verdicts) {
            if (fs::exists(verdict_path)) {
                for_each_jsonl(verdict_path, [&](const json& j, std::size_t) { verdicts.push_back(JudgeVerdict::from_json(j)); });
            } else {
                log(method_id + ": no verdicts file, judge rates left empty");
            }
        }

        std::vector<HelpDefeatResult> all;
        for (const auto& spec : config.scorers) {
            const auto score_path = artifacts::scores_file(stage, method.method, spec.scorer_id);
            require_file(score_path, "run score first");
            std::unordered_map<std::string, std::vector<ScoredDocument>> by_topic;
            for (auto& line : artifacts::load_scores(score_path)) by_topic[line.topic_id].push_back(line.scored);

            std::vector<json> lines;
            for (const auto& pool : pools) {
                auto it = pool.adversarial.find(method_id);
                if (it == pool.adversarial.end() || it->second.empty()) {
                    ++ev.skipped_topics;
                    continue;
                }
                auto result = compute_pool_metrics(by_topic[pool.topic_id], pool, method_id, spec.scorer_id);
                lines.push_back(result.to_json());
                all.push_back(std::move(result));
            }
            write_file_atomic(artifacts::results_file(stage, method.method, spec.scorer_id), to_jsonl(lines));
        }
        if (all.empty()) {
            log(method_id + ": no topic has adversarial documents, nothing to evaluate");
            continue;
        }
        const auto k = is_few_shot(method.method) ? std::optional(method.k) : std::nullopt;
        for (auto& r : aggregate(all, verdicts, Grouping::per_scorer, dataset, generation_failures)) {
            r.k = k;
            ev.per_scorer.push_back(std::move(r));
        }
        for (auto& r : aggregate(all, verdicts, Grouping::averaged_over_scorers, dataset, generation_failures)) {
            r.k = k;
            ev.averaged.push_back(std::move(r));
        }
        ev.results[method.method] = std::move(all);
    }
    return ev;
}

json report_json(const MetricsReport& r) {
    auto opt = [](const std::optional<Fraction>& f) { return f ? json(to_string(*f)) : json(nullptr); };
    return json{{"dataset", r.dataset},
                {"method", r.method_id},
                {"scorer", r.scorer_id},
                {"k", r.k ? json(*r.k) : json(nullptr)},
                {"topics", r.topics},
                {"mhdr_macro", to_string(r.mhdr_macro)},
                {"stance_alignment_rate", opt(r.stance_alignment_rate)},
                {"detection_pass_rate", opt(r.detection_pass_rate)},
                {"stance_judged", r.stance_judged},
                {"stance_unparseable", r.stance_unparseable},
                {"detection_judged", r.detection_judged},
                {"detection_unparseable", r.detection_unparseable},
                {"generation_failures", r.generation_failures}};
}

std::size_t distinct_support_topics_excluding(const std::vector<SupportCandidate>& support, const std::string& target) {
    std::set<std::string> ids;
    for (const auto& c : support)
        if (c.topic.topic_id != target) ids.insert(c.topic.topic_id);
    return ids.size();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    try {
        check_keys(j, {"name", "data", "output_dir", "cache_dir", "templates", "seed", "fixed_timestamp", "chunking",
                       "methods", "generator", "judge", "scorers", "concurrency", "retry"},
                   "config");
        RunConfig c;
        c.name = j.value("name", "run");
        const auto& data = j.at("data");
        check_keys(data, {"topics", "judgments", "documents"}, "data");
        c.topics = resolve(base_dir, data.at("topics").get<std::string>());
        c.judgments = resolve(base_dir, data.at("judgments").get<std::string>());
        c.documents = resolve(base_dir, data.at("documents").get<std::string>());
        c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
        c.cache_dir = resolve(c.output_dir, j.value("cache_dir", "cache"));
        if (j.contains("templates")) {
            const auto& t = j.at("templates");
            check_keys(t, {"dir", "version"}, "templates");
            c.templates_dir = resolve(base_dir, t.at("dir").get<std::string>());
            c.template_version = t.value("version", "v1");
        } else {
            throw ConfigError("config: 'templates' is required");
        }
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("fixed_timestamp")) c.fixed_timestamp = j.at("fixed_timestamp").get<std::string>();
        if (j.contains("chunking")) {
            const auto& ch = j.at("chunking");
            check_keys(ch, {"size", "stride"}, "chunking");
            c.chunking.size = ch.value("size", std::size_t{512});
            c.chunking.stride = ch.value("stride", std::size_t{256});
            if (c.chunking.size < 1 || c.chunking.stride < 1 || c.chunking.stride > c.chunking.size)
                throw ConfigError("chunking: need size >= 1 and 1 <= stride <= size");
        }
        std::set<AttackMethod> seen_methods;
        for (const auto& m : j.at("methods")) {
            check_keys(m, {"method", "k", "seed"}, "methods[]");
            AttackConfig a;
            a.method = parse_attack_method(m.at("method").get<std::string>());
            a.k = m.value("k", std::size_t{3});
            a.seed = m.contains("seed") ? m.at("seed").get<std::uint64_t>() : derive_seed(c.seed, to_string(a.method));
            if (is_few_shot(a.method) && a.k == 0) throw ConfigError("methods[]: k must be positive");
            if (!seen_methods.insert(a.method).second)
                throw ConfigError("methods[]: " + std::string(to_string(a.method)) + " listed twice");
            c.methods.push_back(a);
        }
        c.generator = parse_backend(j.at("generator"), "generator");
        c.judge = parse_backend(j.at("judge"), "judge");
        std::set<std::string> scorer_ids;
        for (const auto& s : j.at("scorers")) {
            c.scorers.push_back(parse_scorer(s));
            if (!scorer_ids.insert(c.scorers.back().scorer_id).second)
                throw ConfigError("scorers: duplicate id " + c.scorers.back().scorer_id);
        }
        if (c.scorers.empty()) throw ConfigError("config: at least one scorer is required");
        if (j.contains("concurrency")) {
            const auto& cc = j.at("concurrency");
            check_keys(cc, {"generation", "scoring", "judging"}, "concurrency");
            c.concurrency.generation = cc.value("generation", std::size_t{4});
            c.concurrency.scoring = cc.value("scoring", std::size_t{4});
            c.concurrency.judging = cc.value("judging", std::size_t{4});
        }
        if (j.contains("retry")) {
            const auto& r = j.at("retry");
            check_keys(r, {"base_seconds", "factor", "max_attempts"}, "retry");
            c.retry.base = std::chrono::duration<double>(r.value("base_seconds", 1.0));
            c.retry.factor = r.value("factor", 2.0);
            c.retry.max_attempts = r.value("max_attempts", 5);
            if (c.retry.max_attempts < 1 || c.retry.factor < 1.0 || c.retry.base.count() < 0)
                throw ConfigError("retry: need max_attempts >= 1, factor >= 1, base_seconds >= 0");
        }
        TemplateLibrary::load(c.templates_dir, c.template_version);

        json canonical = j;
        canonical.erase("output_dir");
        c.digest = sha256_hex(canonical.dump());
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig RunConfig::load(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
}

void RunConfig::set_output_dir(const fs::path& dir) {
    auto relative_cache = cache_dir.lexically_relative(output_dir);
    const bool under_output = !relative_cache.empty() && *relative_cache.begin() != "..";
    output_dir = fs::absolute(dir).lexically_normal();
    if (under_output) cache_dir = output_dir / relative_cache;
}

TimestampSource RunConfig::clock() const {
    return fixed_timestamp ? TimestampSource::fixed(*fixed_timestamp) : TimestampSource::wall_clock();
}

const AttackConfig* RunConfig::find_method(AttackMethod m) const {
    for (const auto& a : methods)
        if (a.method == m) return &a;
    return nullptr;
}

json RunManifest::to_json() const {
    return json{{"run_id", run_id},
                {"config_digest", config_digest},
                {"tool_version", tool_version},
                {"stages", stages},
                {"counts", counts}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.run_id = j.value("run_id", "");
    m.config_digest = j.value("config_digest", "");
    m.tool_version = j.value("tool_version", "");
    m.stages = j.value("stages", std::map<std::string, std::string>{});
    m.counts = j.value("counts", std::map<std::string, std::size_t>{});
    return m;
}

namespace artifacts {

fs::path pools_file(const fs::path& out) { return out / "pools.jsonl"; }
fs::path support_file(const fs::path& out) { return out / "support.jsonl"; }
fs::path manifest_file(const fs::path& out) { return out / "manifest.json"; }

fs::path generations_file(const fs::path& stage, AttackMethod m) {
    return stage / "generations" / (std::string(to_string(m)) + ".jsonl");
}

fs::path scores_file(const fs::path& stage, AttackMethod m, const std::string& scorer) {
    return stage / "scores" / (std::string(to_string(m)) + "__" + scorer + ".jsonl");
}

fs::path verdicts_file(const fs::path& stage, AttackMethod m) {
    return stage / "verdicts" / (std::string(to_string(m)) + ".jsonl");
}

fs::path results_file(const fs::path& stage, AttackMethod m, const std::string& scorer) {
    return stage / "results" / (std::string(to_string(m)) + "__" + scorer + ".jsonl");
}

std::vector<RankingPool> load_pools(const fs::path& path) {
    std::vector<RankingPool> pools;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            RankingPool p;
            p.topic_id = j.at("topic_id").get<std::string>();
            p.helpful = parse_docs(j.at("helpful"), Provenance::human_helpful);
            p.harmful = parse_docs(j.at("harmful"), Provenance::human_harmful);
            if (!p.admitted()) throw std::invalid_argument("pool lacks helpful or harmful documents");
            pools.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
    });
    return pools;
}

std::vector<SupportCandidate> load_support(const fs::path& path, const std::vector<Topic>& topics) {
    std::unordered_map<std::string, const Topic*> by_id;
    for (const auto& t : topics) by_id.emplace(t.topic_id, &t);
    std::vector<SupportCandidate> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        const auto id = j.at("topic_id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ParseError(path.string(), line, "unknown topic " + id);
        for (auto& d : parse_docs(j.at("docs"), Provenance::human_harmful))
            out.push_back(SupportCandidate{*it->second, std::move(d)});
    });
    return out;
}

std::vector<GenerationRecord> load_generations(const fs::path& path) {
    std::vector<GenerationRecord> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            out.push_back(GenerationRecord::from_json(j));
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
    });
    return out;
}

std::vector<ScoreLine> load_scores(const fs::path& path) {
    std::vector<ScoreLine> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            ScoreLine s;
            s.topic_id = j.at("topic_id").get<std::string>();
            s.role = j.at("role").get<std::string>();
            s.scored.doc_id = j.at("doc_id").get<std::string>();
            s.scored.score = j.at("score").get<double>();
            s.scored.scorer_id = j.at("scorer").get<std::string>();
            s.scored.best_chunk_start = j.at("best_chunk_start").get<std::size_t>();
            out.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line, e.what());
        }
    });
    return out;
}

}  // namespace artifacts

CommandResult cmd_build_pools(const RunConfig& config) {
    const auto topics = load_topics(config.topics);
    const auto judgments = load_judgments(config.judgments);
    const auto docs = load_documents(config.documents);

    std::vector<std::optional<RankingPool>> candidates;
    std::vector<json> support_lines;
    for (const auto& topic : topics) {
        try {
            candidates.push_back(select_pool(topic, judgments, docs, config.seed));
            auto harmful = select_tiered(topic, judgments, docs, harmful_tiers(topic.dataset),
                                         Provenance::human_harmful, config.seed);
            if (!harmful.empty()) support_lines.push_back(json{{"topic_id", topic.topic_id}, {"docs", doc_list(harmful)}});
        } catch (const Error& e) {
            throw Error("build-pools: topic " + topic.topic_id + ": " + e.what());
        }
    }
    const auto pools = filter_usable_topics(std::move(candidates));
    std::vector<json> pool_lines;
    for (const auto& p : pools)
        pool_lines.push_back(json{{"topic_id", p.topic_id}, {"helpful", doc_list(p.helpful)}, {"harmful", doc_list(p.harmful)}});

    write_file_atomic(artifacts::pools_file(config.output_dir), to_jsonl(pool_lines));
    write_file_atomic(artifacts::support_file(config.output_dir), to_jsonl(support_lines));
    update_manifest(config, "build_pools", "complete");

    const auto summary = std::to_string(pools.size()) + " pools admitted, " +
                         std::to_string(topics.size() - pools.size()) + " topics excluded";
    log("build-pools: " + summary);
    return {ExitCode::ok, summary};
}

CommandResult cmd_attack(const RunConfig& config, std::optional<AttackMethod> only,
                         std::optional<std::size_t> k_override) {
    const auto in = load_inputs(config);
    require_file(artifacts::support_file(config.output_dir), "run build-pools first");
    const auto support = artifacts::load_support(artifacts::support_file(config.output_dir), in.topics);
    auto methods = selected_methods(config, only);
    if (k_override) {
        if (*k_override == 0) throw ConfigError("--k must be positive");
        for (auto& m : methods)
            if (is_few_shot(m.method)) m.k = *k_override;
    }
    auto outcome = attack_stage(config, in, support, config.output_dir, methods, open_cache(config));
    const bool partial = outcome.failures > 0;
    update_manifest(config, "attack", partial ? "partial" : "complete");
    return {partial ? ExitCode::partial : ExitCode::ok,
            std::to_string(outcome.items) + " generation records, " + std::to_string(outcome.failures) + " failed"};
}

CommandResult cmd_score(const RunConfig& config, std::optional<std::string> only_scorer,
                        std::optional<AttackMethod> only_method) {
    const auto in = load_inputs(config);
    auto outcome = score_stage(config, in, config.output_dir, selected_methods(config, only_method),
                               selected_scorers(config, only_scorer));
    const bool partial = outcome.failures > 0;
    update_manifest(config, "score", partial ? "partial" : "complete");
    return {partial ? ExitCode::partial : ExitCode::ok,
            std::to_string(outcome.items) + " scores, " + std::to_string(outcome.failures) + " failures"};
}

CommandResult cmd_judge(const RunConfig& config, std::optional<AttackMethod> only) {
    const auto in = load_inputs(config);
    const auto templates = TemplateLibrary::load(config.templates_dir, config.template_version);
    auto cache = open_cache(config);
    auto gateway = make_gateway(config.judge, cache, config.retry);

    std::size_t total = 0, unparseable = 0, failures = 0;
    for (const auto& method : selected_methods(config, only)) {
        const auto gen_path = artifacts::generations_file(config.output_dir, method.method);
        require_file(gen_path, "run attack first");
        std::vector<GenerationRecord> records;
        for (auto& r : artifacts::load_generations(gen_path))
            if (r.ok) records.push_back(std::move(r));

        std::vector<JudgeVerdict> verdicts(records.size());
        std::vector<char> failed(records.size(), 0);
        parallel_for(records.size(), config.concurrency.judging, [&](std::size_t i) {
            const auto& r = records[i];
            const Document doc{r.record_id, r.raw_output, Provenance::adversarial, r.record_id};
            auto& v = verdicts[i];
            v.record_id = r.record_id;
            v.topic_id = r.topic_id;
            v.method_id = std::string(to_string(r.method));
            v.judge_model = config.judge.model_name;
            try {
                auto stance = judge_stance(templates.get("judge_stance"), in.topic(r.topic_id), doc,
                                           r.adversarial_stance, *gateway);
                auto detection = judge_detection(templates.get("judge_detection"), doc, *gateway);
                v.stance_aligned = stance.value;
                if (detection.value) v.flagged_adversarial = !*detection.value;
                v.raw_judge_output = "stance: " + stance.raw + "\ndetection: " + detection.raw;
            } catch (const BackendError& e) {
                failed[i] = 1;
                v.raw_judge_output = std::string("error: ") + e.what();
            }
        });

        std::vector<json> lines;
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            failures += failed[i];
            unparseable += (!failed[i] && !verdicts[i].stance_aligned) + (!failed[i] && !verdicts[i].flagged_adversarial);
            lines.push_back(verdicts[i].to_json());
        }
        total += lines.size();
        write_file_atomic(artifacts::verdicts_file(config.output_dir, method.method), to_jsonl(lines));
    }
    cache->flush();
    const bool partial = failures > 0;
    update_manifest(config, "judge", partial ? "partial" : "complete");
    return {partial ? ExitCode::partial : ExitCode::ok,
            std::to_string(total) + " documents judged, " + std::to_string(unparseable) + " unparseable answers, " +
                std::to_string(failures) + " backend failures"};
}

CommandResult cmd_evaluate(const RunConfig& config) {
    const auto in = load_inputs(config);
    auto ev = evaluate_stage(config, in, config.output_dir, config.methods, true);
    const auto reports_dir = config.output_dir / "reports";
    write_file_atomic(reports_dir / "summary_per_scorer.csv", reports_csv(ev.per_scorer));
    write_file_atomic(reports_dir / "summary_averaged.csv", reports_csv(ev.averaged));
    write_file_atomic(reports_dir / "scatter.csv", scatter_csv(ev.averaged));
    json all = json::array();
    for (const auto& r : ev.per_scorer) all.push_back(report_json(r));
    for (const auto& r : ev.averaged) all.push_back(report_json(r));
    write_file_atomic(reports_dir / "reports.json", all.dump(2) + "\n");

    std::size_t generation_failures = 0;
    for (const auto& r : ev.averaged) generation_failures += r.generation_failures;
    const bool partial = generation_failures > 0 || ev.skipped_topics > 0;
    update_manifest(config, "evaluate", partial ? "partial" : "complete");
    return {partial ? ExitCode::partial : ExitCode::ok,
            std::to_string(ev.per_scorer.size()) + " per-scorer rows, " + std::to_string(ev.averaged.size()) +
                " averaged rows"};
}

CommandResult cmd_sweep(const RunConfig& config, const std::vector<std::size_t>& k_values) {
    const auto* base = config.find_method(AttackMethod::fsap_interq);
    if (!base) throw ConfigError("sweep: FSAP_INTERQ must be configured");
    if (k_values.empty()) throw ConfigError("sweep: no k values");
    std::set<std::size_t> ks(k_values.begin(), k_values.end());
    if (*ks.begin() == 0) throw ConfigError("sweep: k must be positive");

    const auto in = load_inputs(config);
    require_file(artifacts::support_file(config.output_dir), "run build-pools first");
    const auto support = artifacts::load_support(artifacts::support_file(config.output_dir), in.topics);
    for (auto k : ks)
        for (const auto& pool : in.pools) {
            const auto available = distinct_support_topics_excluding(support, pool.topic_id);
            if (available < k)
                throw Error("sweep: insufficient support pool for k=" + std::to_string(k) + ": topic " +
                            pool.topic_id + " has " + std::to_string(available) + " distinct non-target topics");
        }

    auto cache = open_cache(config);
    std::map<std::size_t, std::vector<HelpDefeatResult>> by_k;
    std::size_t failures = 0;
    for (auto k : ks) {
        AttackConfig method = *base;
        method.k = k;
        const auto stage = config.output_dir / "sweep" / ("k" + std::to_string(k));
        failures += attack_stage(config, in, support, stage, {method}, cache).failures;
        failures += score_stage(config, in, stage, {method}, config.scorers).failures;
        auto ev = evaluate_stage(config, in, stage, {method}, false);
        by_k[k] = std::move(ev.results[AttackMethod::fsap_interq]);
    }

    std::vector<MetricsReport> rows;
    const auto dataset = dataset_label(in);
    for (const auto& row : support_size_sweep(by_k)) {
        MetricsReport r;
        r.dataset = dataset;
        r.method_id = std::string(to_string(AttackMethod::fsap_interq));
        r.scorer_id = row.scorer_id;
        r.k = row.k;
        r.mhdr_macro = row.mhdr_macro;
        r.topics = row.topics;
        rows.push_back(std::move(r));
    }
    write_file_atomic(config.output_dir / "reports" / "sweep.csv", reports_csv(rows));
    const bool partial = failures > 0;
    update_manifest(config, "sweep", partial ? "partial" : "complete");
    return {partial ? ExitCode::partial : ExitCode::ok, std::to_string(rows.size()) + " sweep rows"};
}

}  // namespace fsap
