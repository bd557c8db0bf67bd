#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsap/attackgen.hpp"
#include "fsap/corpus.hpp"
#include "fsap/http.hpp"
#include "fsap/llm_gateway.hpp"
#include "fsap/ranking.hpp"
#include "fsap/util.hpp"

namespace fsap {

struct ConcurrencyCaps {
    std::size_t generation = 4;
    std::size_t scoring = 4;
    std::size_t judging = 4;
};

/// Declarative run configuration (JSON). Relative paths resolve against the
/// directory holding the config file; `cache_dir` against `output_dir`.
struct RunConfig {
    std::string name;
    std::filesystem::path topics;
    std::filesystem::path judgments;
    std::filesystem::path documents;
    std::filesystem::path output_dir;
    std::filesystem::path cache_dir;
    std::filesystem::path templates_dir;
    std::string template_version = "v1";
    std::uint64_t seed = 0;
    std::optional<std::string> fixed_timestamp;
    ChunkingOptions chunking;
    std::vector<AttackConfig> methods;
    ModelBackend generator;
    ModelBackend judge;
    std::vector<ScorerSpec> scorers;
    ConcurrencyCaps concurrency;
    RetryPolicy retry;
    /// SHA-256 of the canonical config JSON without output_dir.
    std::string digest;

    static RunConfig from_json(const json& j, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);

    /// Moves the output directory (and a cache_dir that lived under it).
    void set_output_dir(const std::filesystem::path& dir);

    TimestampSource clock() const;
    const AttackConfig* find_method(AttackMethod m) const;
};

struct RunManifest {
    std::string run_id;
    std::string config_digest;
    std::string tool_version;
    std::map<std::string, std::string> stages;
    std::map<std::string, std::size_t> counts;

    json to_json() const;
    static RunManifest from_json(const json& j);
};

/// Process exit codes.
enum class ExitCode : int { ok = 0, usage = 1, partial = 2 };

struct CommandResult {
    ExitCode code = ExitCode::ok;
    std::string summary;
};

CommandResult cmd_build_pools(const RunConfig& config);
CommandResult cmd_attack(const RunConfig& config, std::optional<AttackMethod> only = std::nullopt,
                         std::optional<std::size_t> k_override = std::nullopt);
CommandResult cmd_score(const RunConfig& config, std::optional<std::string> only_scorer = std::nullopt,
                        std::optional<AttackMethod> only_method = std::nullopt);
CommandResult cmd_judge(const RunConfig& config, std::optional<AttackMethod> only = std::nullopt);
CommandResult cmd_evaluate(const RunConfig& config);
CommandResult cmd_sweep(const RunConfig& config, const std::vector<std::size_t>& k_values);

/// Persisted artifacts, shared by the commands and by tests.
namespace artifacts {

std::filesystem::path pools_file(const std::filesystem::path& out);
std::filesystem::path support_file(const std::filesystem::path& out);
std::filesystem::path manifest_file(const std::filesystem::path& out);
std::filesystem::path generations_file(const std::filesystem::path& stage, AttackMethod m);
std::filesystem::path scores_file(const std::filesystem::path& stage, AttackMethod m, const std::string& scorer);
std::filesystem::path verdicts_file(const std::filesystem::path& stage, AttackMethod m);
std::filesystem::path results_file(const std::filesystem::path& stage, AttackMethod m, const std::string& scorer);

std::vector<RankingPool> load_pools(const std::filesystem::path& path);
std::vector<SupportCandidate> load_support(const std::filesystem::path& path, const std::vector<Topic>& topics);
std::vector<GenerationRecord> load_generations(const std::filesystem::path& path);

struct ScoreLine {
    std::string topic_id;
    std::string role;
    ScoredDocument scored;
};
std::vector<ScoreLine> load_scores(const std::filesystem::path& path);

}  // namespace artifacts

}  // namespace fsap
