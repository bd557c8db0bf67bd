#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsap/error.hpp"
#include "fsap/pipeline.hpp"

namespace {

int finish(const fsap::CommandResult& r) {
    std::cout << r.summary << '\n';
    return static_cast<int>(r.code);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot adversarial prompting workbench against neural rankers"};
    app.set_version_flag("--version", FSAP_VERSION);
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    std::string method;
    std::string scorer;
    std::size_t k = 0;
    std::vector<std::size_t> sweep_k{1, 3, 5, 7, 9, 10};

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--output", output_dir, "Override the output directory");
    };

    auto* build = app.add_subcommand("build-pools", "Select helpful and harmful documents per topic");
    add_common(build);
    auto* attack = app.add_subcommand("attack", "Generate adversarial documents");
    add_common(attack);
    attack->add_option("--method", method, "Only this attack method");
    attack->add_option("--k", k, "Support size for few-shot methods");
    auto* score = app.add_subcommand("score", "Score pools with the configured rankers");
    add_common(score);
    score->add_option("--method", method, "Only this attack method");
    score->add_option("--scorer", scorer, "Only this scorer id");
    auto* judge = app.add_subcommand("judge", "Judge stance and detectability of generated documents");
    add_common(judge);
    judge->add_option("--method", method, "Only this attack method");
    auto* evaluate = app.add_subcommand("evaluate", "Compute help-defeat rates and write reports");
    add_common(evaluate);
    auto* sweep = app.add_subcommand("sweep", "Support-size sweep for inter-query few-shot prompting");
    add_common(sweep);
    sweep->add_option("--k", sweep_k, "Support sizes")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; every other parse problem is a usage error.
        return app.exit(e) == 0 ? 0 : static_cast<int>(fsap::ExitCode::usage);
    }

    try {
        auto config = fsap::RunConfig::load(config_path);
        if (!output_dir.empty()) config.set_output_dir(output_dir);
        std::optional<fsap::AttackMethod> only_method;
        if (!method.empty()) only_method = fsap::parse_attack_method(method);

        if (build->parsed()) return finish(fsap::cmd_build_pools(config));
        if (attack->parsed())
            return finish(fsap::cmd_attack(config, only_method, k ? std::optional<std::size_t>(k) : std::nullopt));
        if (score->parsed())
            return finish(fsap::cmd_score(config, scorer.empty() ? std::nullopt : std::optional(scorer), only_method));
        if (judge->parsed()) return finish(fsap::cmd_judge(config, only_method));
        if (evaluate->parsed()) return finish(fsap::cmd_evaluate(config));
        if (sweep->parsed()) return finish(fsap::cmd_sweep(config, sweep_k));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(fsap::ExitCode::usage);
    }
    return static_cast<int>(fsap::ExitCode::usage);
}
