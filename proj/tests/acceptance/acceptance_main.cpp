// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "fsap/attackgen.hpp"
#include "fsap/error.hpp"
#include "fsap/llm_gateway.hpp"
#include "fsap/metrics.hpp"
#include "fsap/pipeline.hpp"
#include "fsap/ranking.hpp"
#include "fsap/templates.hpp"
#include "local_server.hpp"
#include "oracles.hpp"

using namespace fsap;
namespace fs = std::filesystem;

namespace {

const fs::path kSource(FSAP_SOURCE_DIR);
const fs::path kSynthetic = kSource / "data/synthetic";

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt_seconds(double s) {
    std::ostringstream out;
    out.precision(2);
    out << std::fixed << s << " s";
    return out.str();
}

json synthetic_json() { return json::parse(read_file(kSynthetic / "config.json")); }

RunConfig synthetic_config(json j, const std::string& out_name) {
    j["output_dir"] = oracle::fresh_dir(out_name).string();
    return RunConfig::from_json(j, kSynthetic);
}

void expect_ok(const CommandResult& r, const std::string& stage) {
    if (r.code != ExitCode::ok) throw std::runtime_error(stage + " exited with " + std::to_string(int(r.code)) + ": " + r.summary);
}

void run_pipeline(const RunConfig& c) {
    expect_ok(cmd_build_pools(c), "build-pools");
    expect_ok(cmd_attack(c), "attack");
    expect_ok(cmd_score(c), "score");
    expect_ok(cmd_judge(c), "judge");
    expect_ok(cmd_evaluate(c), "evaluate");
}

double draw_score(Rng& rng) {
    // Half continuous, half from a small grid so ties are common.
    if (rng.below(2) == 0) return static_cast<double>(rng.next() >> 11) / 9007199254740992.0;
    return static_cast<double>(rng.below(4)) / 4.0;
}

// 1. HDR / MHDR against the pairwise oracle.
Outcome metric_oracle() {
    Timer timer;
    Rng rng(1001);
    std::size_t mismatches = 0;
    for (int instance = 0; instance < 1000; ++instance) {
        std::vector<double> helpful(1 + rng.below(10)), adversarial(1 + rng.below(10));
        for (auto& h : helpful) h = draw_score(rng);
        for (auto& a : adversarial) a = draw_score(rng);
        std::vector<Fraction> hdrs;
        for (double a : adversarial) {
            hdrs.push_back(help_defeat_rate(helpful, a));
            if (hdrs.back() != oracle::hdr(helpful, a)) ++mismatches;
        }
        if (mhdr(hdrs) != oracle::mhdr(helpful, adversarial)) ++mismatches;
    }
    const double t = timer.seconds();
    return {mismatches == 0 && t < 5.0,
            "1000 instances, " + std::to_string(mismatches) + " mismatches, " + fmt_seconds(t)};
}

// 2. Ties never count as a defeat.
Outcome tie_semantics() {
    const std::vector<double> flat{0.5, 0.5, 0.5};
    if (help_defeat_rate(flat, 0.5) != 0) return {false, "([0.5,0.5,0.5], 0.5) is not 0"};
    Rng rng(2002);
    std::size_t violations = 0;
    for (int config = 0; config < 200; ++config) {
        std::vector<double> helpful(1 + rng.below(10));
        for (auto& h : helpful) h = static_cast<double>(rng.below(3));
        const double a = helpful[rng.below(helpful.size())];  // always tied with at least one
        std::size_t below = 0, at_most = 0;
        for (double h : helpful) {
            below += h < a;
            at_most += h <= a;
        }
        const auto hdr = help_defeat_rate(helpful, a);
        if (hdr != Fraction(below, helpful.size()) || hdr == Fraction(at_most, helpful.size())) ++violations;
    }
    return {violations == 0, "HDR([0.5,0.5,0.5], 0.5) = 0; 200 tie configurations, " +
                                 std::to_string(violations) + " violations"};
}

// 3. Window count, coverage and overlap.
Outcome chunking_law() {
    Timer timer;
    Rng rng(3003);
    std::size_t bad = 0;
    for (int i = 0; i < 500; ++i) {
        const std::size_t n = 1 + rng.below(5000);
        std::vector<std::string> tokens(n);
        for (std::size_t t = 0; t < n; ++t) tokens[t] = std::to_string(t);
        const auto chunks = chunk("d", tokens);
        const std::size_t expected = (n > 512 ? (n - 512 + 255) / 256 : 0) + 1;
        bool ok = chunks.size() == expected;
        std::size_t covered_to = 0;
        for (std::size_t c = 0; ok && c < chunks.size(); ++c) {
            const auto& ch = chunks[c];
            ok = ch.start_token <= covered_to && ch.tokens.front() == tokens[ch.start_token] &&
                 ch.tokens.back() == tokens[ch.start_token + ch.tokens.size() - 1];
            covered_to = std::max(covered_to, ch.start_token + ch.tokens.size());
            if (ok && c + 1 < chunks.size() && ch.tokens.size() == 512 && chunks[c + 1].tokens.size() == 512)
                ok = ch.start_token + 512 - chunks[c + 1].start_token == 256;
        }
        ok = ok && covered_to == n;
        bad += ok ? 0 : 1;
    }
    const double t = timer.seconds();
    return {bad == 0 && t < 2.0, "500 token counts, " + std::to_string(bad) + " violations, " + fmt_seconds(t)};
}

json base_config(const fs::path& dir) {
    return json{{"name", "acceptance"},
                {"data", {{"topics", "topics.jsonl"}, {"judgments", "qrels.txt"}, {"documents", "documents.jsonl"}}},
                {"output_dir", "out"},
                {"templates", {{"dir", (kSource / "assets/templates").string()}, {"version", "v1"}}},
                {"seed", 7},
                {"fixed_timestamp", "2024-01-01T00:00:00Z"},
                {"methods", json::array({json{{"method", "LIAR"}}})},
                {"generator", {{"id", "g"}, {"kind", "MOCK"}, {"model", "m"}, {"behavior", "ECHO_TOPIC_TERMS"}}},
                {"judge", {{"id", "j"}, {"kind", "MOCK"}, {"model", "m"}, {"behavior", "JUDGE_HEURISTIC"}}},
                {"scorers", json::array({json{{"id", "bm25"}, {"kind", "LEXICAL_BM25"}}})},
                {"cache_dir", (dir / "cache").string()}};
}

// Writes a qrels collection with `total` topics of which `admissible` have both sides.
std::size_t pools_for_shape(const std::string& dataset, std::size_t total, std::size_t admissible,
                            std::vector<int> helpful_codes, std::vector<int> harmful_codes,
                            std::vector<int> other_codes, std::uint64_t seed) {
    const auto dir = oracle::fresh_dir("qrels_" + dataset);
    Rng rng(seed);
    auto picks = sample_indices(total, admissible, rng);
    std::set<std::size_t> good(picks.begin(), picks.end());
    std::string topics, qrels, docs;
    auto pick = [&](const std::vector<int>& codes) { return codes[rng.below(codes.size())]; };
    for (std::size_t t = 0; t < total; ++t) {
        const auto id = std::to_string(100 + t);
        topics += json{{"topic_id", id}, {"query", "query " + id}, {"description", "question " + id},
                       {"stance", t % 2 ? "HELPS" : "DOES_NOT_HELP"}, {"dataset", dataset}}.dump() + "\n";
        std::vector<int> codes;
        const bool both = good.contains(t);
        const auto variant = t % 3;
        const bool has_helpful = both || variant == 0;
        const bool has_harmful = both || variant == 1;
        if (has_helpful)
            for (std::size_t i = 0, n = 1 + rng.below(14); i < n; ++i) codes.push_back(pick(helpful_codes));
        if (has_harmful)
            for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) codes.push_back(pick(harmful_codes));
        for (std::size_t i = 0, n = 2 + rng.below(5); i < n; ++i) codes.push_back(pick(other_codes));
        for (std::size_t i = 0; i < codes.size(); ++i) {
            const auto doc_id = "d" + id + "_" + std::to_string(i);
            qrels += id + " 0 " + doc_id + " " + std::to_string(codes[i]) + "\n";
            docs += json{{"doc_id", doc_id}, {"text", "text for " + doc_id}}.dump() + "\n";
        }
    }
    write_file_atomic(dir / "topics.jsonl", topics);
    write_file_atomic(dir / "qrels.txt", qrels);
    write_file_atomic(dir / "documents.jsonl", docs);
    auto config = RunConfig::from_json(base_config(dir), dir);
    expect_ok(cmd_build_pools(config), "build-pools");
    return count_lines(artifacts::pools_file(config.output_dir));
}

// 4. Pool admission counts on qrels shaped like the two collections.
Outcome pool_selection() {
    const auto p2020 = pools_for_shape("TREC2020", 46, 22, {4}, {-2}, {3, 2, 1, 0, -1}, 4004);
    const auto p2021 = pools_for_shape("TREC2021", 35, 27, {12, 11, 10, 9}, {-3, -2}, {8, 5, 2, 0, -1}, 4005);
    return {p2020 == 22 && p2021 == 27,
            "TREC2020-shaped 46 topics -> " + std::to_string(p2020) + " pools (want 22); TREC2021-shaped 35 topics -> " +
                std::to_string(p2021) + " pools (want 27)"};
}

// 5. Support sets in a full mock run.
Outcome support_properties(const RunConfig& c) {
    std::size_t inter = 0, inter_ok = 0, intra = 0, intra_ok = 0;
    for (const auto& r : artifacts::load_generations(artifacts::generations_file(c.output_dir, AttackMethod::fsap_interq))) {
        ++inter;
        std::set<std::string> topics;
        bool foreign = true;
        for (const auto& ex : r.support) {
            topics.insert(ex.source_topic_id);
            foreign = foreign && ex.source_topic_id != r.topic_id;
        }
        inter_ok += r.support.size() == 3 && topics.size() == 3 && foreign && r.k == 3;
    }
    for (const auto& r : artifacts::load_generations(artifacts::generations_file(c.output_dir, AttackMethod::fsap_intraq))) {
        ++intra;
        bool own = !r.support.empty();
        for (const auto& ex : r.support) own = own && ex.source_topic_id == r.topic_id;
        intra_ok += r.support.size() <= 3 && own;
    }
    return {inter > 0 && intra > 0 && inter == inter_ok && intra == intra_ok,
            "FSAP_INTERQ " + std::to_string(inter_ok) + "/" + std::to_string(inter) + ", FSAP_INTRAQ " +
                std::to_string(intra_ok) + "/" + std::to_string(intra) + " records conform"};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
    return files;
}

// 6. Two offline runs give identical artifact trees.
Outcome determinism(RunConfig& first_out) {
    Timer timer;
    auto a = synthetic_config(synthetic_json(), "determinism_a");
    auto b = synthetic_config(synthetic_json(), "determinism_b");
    run_pipeline(a);
    run_pipeline(b);
    const double t = timer.seconds();
    const auto ta = tree(a.output_dir), tb = tree(b.output_dir);
    std::size_t differing = 0;
    for (const auto& [name, content] : ta) {
        auto it = tb.find(name);
        differing += it == tb.end() || it->second != content;
    }
    differing += tb.size() > ta.size() ? tb.size() - ta.size() : 0;
    first_out = a;
    return {differing == 0 && !ta.empty() && t < 60.0,
            std::to_string(ta.size()) + " files compared, " + std::to_string(differing) + " differ, " + fmt_seconds(t)};
}

// Macro MHDR of one method/scorer from the results file, and the oracle value from raw scores.
std::pair<Fraction, Fraction> macro_and_oracle(const RunConfig& c, AttackMethod m, const std::string& scorer) {
    std::vector<Fraction> reported, expected;
    for_each_jsonl(artifacts::results_file(c.output_dir, m, scorer), [&](const json& j, std::size_t) {
        reported.push_back(parse_fraction(j.at("mhdr").get<std::string>()));
    });
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_topic;
    for (const auto& s : artifacts::load_scores(artifacts::scores_file(c.output_dir, m, scorer))) {
        if (s.role == "helpful") by_topic[s.topic_id].first.push_back(s.scored.score);
        if (s.role == "adversarial") by_topic[s.topic_id].second.push_back(s.scored.score);
    }
    for (const auto& [topic, pair] : by_topic)
        if (!pair.second.empty()) expected.push_back(oracle::mhdr(pair.first, pair.second));
    auto mean = [](const std::vector<Fraction>& v) {
        Fraction sum = 0;
        for (const auto& x : v) sum += x;
        return v.empty() ? Fraction(-1) : sum / Fraction(v.size());
    };
    return {mean(reported), mean(expected)};
}

// 7. Keyword stuffing wins, query-free text never does.
Outcome attack_direction() {
    auto j = synthetic_json();
    j["methods"] = json::array({json{{"method", "FSAP_INTERQ"}, {"k", 3}}, json{{"method", "LIAR"}}});
    j["scorers"] = json::array({json{{"id", "bm25"}, {"kind", "LEXICAL_BM25"}}});
    j["generator"]["behavior"] = "KEYWORD_STUFF";
    auto stuffed = synthetic_config(j, "direction_stuff");
    j["generator"]["behavior"] = "FIXED_TEXT";
    j["generator"]["fixed_text"] = "Lorem ipsum dolor sit amet, consectetur adipiscing elit.";
    auto fixed = synthetic_config(j, "direction_fixed");
    for (auto* c : {&stuffed, &fixed}) {
        expect_ok(cmd_build_pools(*c), "build-pools");
        expect_ok(cmd_attack(*c), "attack");
        expect_ok(cmd_score(*c), "score");
        expect_ok(cmd_evaluate(*c), "evaluate");
    }
    bool pass = true;
    std::string detail;
    for (auto m : {AttackMethod::fsap_interq, AttackMethod::liar}) {
        auto [hi, hi_oracle] = macro_and_oracle(stuffed, m, "bm25");
        auto [lo, lo_oracle] = macro_and_oracle(fixed, m, "bm25");
        pass = pass && hi == hi_oracle && hi >= Fraction(4, 5) && lo == lo_oracle && lo == 0;
        detail += std::string(to_string(m)) + ": KEYWORD_STUFF " + percent(hi) + "% (oracle " + percent(hi_oracle) +
                  "%), FIXED_TEXT " + percent(lo) + "% (oracle " + percent(lo_oracle) + "%); ";
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

// Applies s -> 2s + 1 to every pair score of an inner scorer.
class AffineScorer : public ChunkScorer {
public:
    explicit AffineScorer(ChunkScorer& inner) : inner_(inner) {}
    const std::string& id() const override { return id_; }
    std::vector<double> score_chunks(std::string_view q, std::span<const Chunk> chunks, const CorpusStats& s) override {
        auto scores = inner_.score_chunks(q, chunks, s);
        for (auto& x : scores) x = 2.0 * x + 1.0;
        return scores;
    }

private:
    ChunkScorer& inner_;
    std::string id_ = "affine";
};

// 8. Monotone affine transform changes nothing.
Outcome rank_invariance() {
    Rng rng(8008);
    const std::vector<std::string> vocab{"zinc", "cold", "honey", "cough", "garlic", "pressure", "vitamin", "virus",
                                         "trial", "dose", "study", "risk", "children", "blood", "effect", "evidence"};
    auto text = [&](std::size_t len) {
        std::string out;
        for (std::size_t i = 0; i < len; ++i) out += vocab[rng.below(vocab.size())] + " ";
        return out;
    };
    std::size_t differing = 0;
    for (int p = 0; p < 100; ++p) {
        Topic topic{"t" + std::to_string(p), text(3), text(6), Stance::helps, Dataset::synthetic};
        RankingPool pool;
        pool.topic_id = topic.topic_id;
        for (std::size_t i = 0, n = 1 + rng.below(10); i < n; ++i)
            pool.helpful.push_back({"h" + std::to_string(i), text(5 + rng.below(700)), Provenance::human_helpful, {}});
        for (std::size_t i = 0, n = 1 + rng.below(10); i < n; ++i)
            pool.harmful.push_back({"x" + std::to_string(i), text(5 + rng.below(300)), Provenance::human_harmful, {}});
        auto& adv = pool.adversarial["M"];
        for (std::size_t i = 0, n = 1 + rng.below(10); i < n; ++i)
            adv.push_back({"a" + std::to_string(i), text(5 + rng.below(300)), Provenance::adversarial, "a" + std::to_string(i)});

        Bm25Scorer base("bm25", {});
        AffineScorer affine(base);
        auto r1 = rank_pool(topic, pool, "M", base);
        auto r2 = rank_pool(topic, pool, "M", affine);
        bool same = r1.size() == r2.size();
        for (std::size_t i = 0; same && i < r1.size(); ++i) same = r1[i].doc_id == r2[i].doc_id;
        auto m1 = compute_pool_metrics(r1, pool, "M", "x");
        auto m2 = compute_pool_metrics(r2, pool, "M", "x");
        same = same && m1.mhdr == m2.mhdr;
        for (std::size_t i = 0; same && i < m1.per_adversarial.size(); ++i)
            same = m1.per_adversarial[i].hdr == m2.per_adversarial[i].hdr;
        differing += same ? 0 : 1;
    }
    return {differing == 0, "100 random pools, " + std::to_string(differing) + " changed"};
}

// Counts calls and keys seen, delegating to the mock.
class CountingTransport : public CompletionTransport {
public:
    explicit CountingTransport(const ModelBackend& b) : backend_(b), inner_(b.mock_behavior, b.fixed_text) {}
    std::string send(const CompletionRequest& r) override {
        std::lock_guard lock(mutex_);
        ++calls;
        ++per_key[cache_key(backend_, r)];
        return inner_.send(r);
    }
    std::size_t calls = 0;
    std::map<std::string, std::size_t> per_key;

private:
    ModelBackend backend_;
    MockTransport inner_;
    std::mutex mutex_;
};

// 9. One backend call per unique key; a warm cache needs none.
Outcome gateway_cache() {
    const auto c = synthetic_config(synthetic_json(), "cache_run");
    expect_ok(cmd_build_pools(c), "build-pools");
    const auto topics = load_topics(c.topics);
    const auto pools = artifacts::load_pools(artifacts::pools_file(c.output_dir));
    const auto support = artifacts::load_support(artifacts::support_file(c.output_dir), topics);
    const auto templates = TemplateLibrary::load(c.templates_dir, c.template_version);
    auto topic_of = [&](const std::string& id) {
        return *std::find_if(topics.begin(), topics.end(), [&](const Topic& t) { return t.topic_id == id; });
    };

    auto run = [&](std::shared_ptr<ResponseCache> cache, int repeats) {
        auto transport = std::make_unique<CountingTransport>(c.generator);
        auto* counter = transport.get();
        Gateway gw(c.generator, std::move(transport), cache);
        GenerationContext ctx{templates, gw, support, c.clock(), 4};
        for (int rep = 0; rep < repeats; ++rep)
            for (const auto& method : c.methods)
                for (auto pool : pools) generate_for_pool(topic_of(pool.topic_id), pool, method, ctx);
        cache->flush();
        return std::make_pair(counter->calls, counter->per_key);
    };
    const auto dir = oracle::fresh_dir("cache_store");
    auto cold_cache = std::make_shared<ResponseCache>(dir, c.clock());
    auto [cold_calls, per_key] = run(cold_cache, 3);
    bool once = !per_key.empty();
    for (const auto& [key, n] : per_key) once = once && n == 1;
    const auto unique_keys = cold_cache->size();
    auto [warm_calls, warm_keys] = run(std::make_shared<ResponseCache>(dir, c.clock()), 1);
    return {once && cold_calls == unique_keys && warm_calls == 0,
            std::to_string(unique_keys) + " unique keys, " + std::to_string(cold_calls) +
                " backend calls over 3 repetitions; warm rerun " + std::to_string(warm_calls) + " calls"};
}

bool well_formed_reports(const fs::path& out, std::size_t expected_rows, std::string& why) {
    for (const char* name : {"summary_per_scorer.csv", "summary_averaged.csv"}) {
        std::istringstream in(read_file(out / "reports" / name));
        std::string line;
        std::getline(in, line);
        if (line != "dataset,method,scorer,k,mhdr,stance_alignment,detection_pass") {
            why = std::string(name) + ": bad header";
            return false;
        }
        std::size_t rows = 0;
        while (std::getline(in, line)) {
            ++rows;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
            if (cells.size() < 5 || std::stod(cells[4]) < 0 || std::stod(cells[4]) > 100) {
                why = std::string(name) + ": bad row " + line;
                return false;
            }
        }
        if (std::string(name) == "summary_per_scorer.csv" && rows != expected_rows) {
            why = std::string(name) + ": " + std::to_string(rows) + " rows";
            return false;
        }
    }
    return true;
}

// 10. Remote backends end to end, plus an opt-in live run.
Outcome live_smoke() {
    testsrv::LocalServer srv;
    srv.required_token = "loopback-token";
    ::setenv("FSAP_ACCEPTANCE_TOKEN", "loopback-token", 1);
    auto j = synthetic_json();
    j["methods"] = json::array({json{{"method", "FSAP_INTERQ"}, {"k", 3}}, json{{"method", "REWRITER"}}});
    j["generator"] = {{"id", "chat"}, {"kind", "REMOTE_CHAT"}, {"endpoint", srv.url("/chat")}, {"model", "chat-model"},
                      {"api_key_env", "FSAP_ACCEPTANCE_TOKEN"}, {"requests_per_minute", 0}};
    j["judge"] = {{"id", "chat-judge"}, {"kind", "REMOTE_CHAT"}, {"endpoint", srv.url("/chat")}, {"model", "judge-model"},
                  {"api_key_env", "FSAP_ACCEPTANCE_TOKEN"}, {"requests_per_minute", 0}, {"temperature", 0.0}};
    j["scorers"] = json::array({json{{"id", "emb"}, {"kind", "REMOTE_EMBEDDING"}, {"endpoint", srv.url("/embed")},
                                     {"model", "e"}, {"api_key_env", "FSAP_ACCEPTANCE_TOKEN"}},
                                json{{"id", "ce"}, {"kind", "REMOTE_CROSS_ENCODER"}, {"endpoint", srv.url("/rerank")},
                                     {"model", "c"}, {"api_key_env", "FSAP_ACCEPTANCE_TOKEN"}}});
    auto c = synthetic_config(j, "live_loopback");
    run_pipeline(c);
    std::string why;
    bool pass = well_formed_reports(c.output_dir, 4, why);
    const bool no_secret = read_file(c.output_dir / "manifest.json").find("loopback-token") == std::string::npos;
    pass = pass && no_secret && srv.chat_calls > 0 && srv.embed_calls > 0 && srv.rerank_calls > 0;
    std::string detail = "loopback chat/embedding/cross-encoder run: " + std::string(pass ? "reports well-formed" : "FAILED " + why);

    if (const char* live = std::getenv("FSAP_LIVE_CONFIG"); live && *live) {
        try {
            auto lc = RunConfig::load(live);
            lc.set_output_dir(oracle::fresh_dir("live_run"));
            run_pipeline(lc);
            const std::size_t rows = lc.methods.size() * lc.scorers.size();
            std::string live_why;
            const bool live_ok = well_formed_reports(lc.output_dir, rows, live_why);
            pass = pass && live_ok;
            detail += "; live run with " + lc.generator.model_name + ": " + (live_ok ? "reports well-formed" : live_why);
        } catch (const std::exception& e) {
            pass = false;
            detail += std::string("; live run failed: ") + e.what();
        }
    } else {
        detail += "; real-backend run not exercised (set FSAP_LIVE_CONFIG to a config with credentials)";
    }
    return {pass, detail};
}

// 11. Support-size sweep.
Outcome sweep_machinery() {
    auto c = synthetic_config(synthetic_json(), "sweep");
    expect_ok(cmd_build_pools(c), "build-pools");
    expect_ok(cmd_sweep(c, {1, 3, 5}), "sweep");
    std::istringstream in(read_file(c.output_dir / "reports/sweep.csv"));
    std::string line;
    std::getline(in, line);
    std::multiset<std::pair<std::string, std::string>> cells;
    bool in_range = true;
    while (std::getline(in, line)) {
        std::vector<std::string> v;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) v.push_back(cell);
        cells.insert({v.at(3), v.at(2)});
        const double pct = std::stod(v.at(4));
        in_range = in_range && pct >= 0.0 && pct <= 100.0;
    }
    bool one_each = cells.size() == 3 * c.scorers.size();
    for (const auto* k : {"1", "3", "5"})
        for (const auto& s : c.scorers) one_each = one_each && cells.count({k, s.scorer_id}) == 1;

    std::set<std::set<std::string>> coverage;
    bool fractions_ok = true;
    for (std::size_t k : {1, 3, 5})
        for (const auto& s : c.scorers) {
            std::set<std::string> topics;
            for_each_jsonl(artifacts::results_file(c.output_dir / "sweep" / ("k" + std::to_string(k)),
                                                   AttackMethod::fsap_interq, s.scorer_id),
                           [&](const json& j, std::size_t) {
                               topics.insert(j.at("topic_id").get<std::string>());
                               auto f = parse_fraction(j.at("mhdr").get<std::string>());
                               fractions_ok = fractions_ok && f >= 0 && f <= 1;
                           });
            coverage.insert(topics);
        }
    return {one_each && in_range && fractions_ok && coverage.size() == 1,
            std::to_string(cells.size()) + " rows for k in {1,3,5} x " + std::to_string(c.scorers.size()) +
                " scorers, MHDR in [0,1]: " + (in_range && fractions_ok ? "yes" : "no") +
                ", identical topic coverage: " + (coverage.size() == 1 ? "yes" : "no")};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << std::endl;
    };

    RunConfig full_run;
    report(1, "metric oracle equivalence", metric_oracle);
    report(2, "tie semantics", tie_semantics);
    report(3, "chunking law", chunking_law);
    report(4, "pool selection", pool_selection);
    // The determinism runs double as the full mock run inspected for support sets.
    Outcome deterministic;
    try {
        deterministic = determinism(full_run);
    } catch (const std::exception& e) {
        deterministic = {false, std::string("exception: ") + e.what()};
    }
    report(5, "support-set properties", [&] {
        if (full_run.output_dir.empty()) return Outcome{false, "no full run available"};
        return support_properties(full_run);
    });
    report(6, "offline determinism", [&] { return deterministic; });
    report(7, "attack direction", attack_direction);
    report(8, "rank-transform invariance", rank_invariance);
    report(9, "gateway cache", gateway_cache);
    report(10, "live-run smoke test", live_smoke);
    report(11, "sweep machinery", sweep_machinery);
    std::cout << (failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED") << " (" << failures << " failing)" << std::endl;
    return failures ? 1 : 0;
}
