#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dera/commands.hpp"
#include "dera/errors.hpp"

namespace {

dera::ExperimentConfig load_with_overrides(const std::string& config_path,
                                           const std::optional<std::uint64_t>& seed) {
    auto config = dera::load_config_file(config_path);
    if (seed) config.sampler.seed = *seed;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Denoising-time realignment lab for analytic diffusion models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    int threads = 1;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed_override, "override the sampler seed");
        cmd->add_option("--threads", threads, "worker threads for sampling")
            ->check(CLI::Range(1, 4096));
    };

    auto* sweep = app.add_subcommand("sweep", "run every (anchor, target) realignment cell");
    add_common(sweep, true);

    auto* bo = app.add_subcommand("bo", "Bayesian-optimize lambda for the configured reward");
    add_common(bo, true);

    auto* sample = app.add_subcommand("sample", "one realigned sampling run, dumped to disk");
    add_common(sample, true);

    auto* oracle = app.add_subcommand("oracle-check",
                                      "closed form vs numeric-integration verification");
    dera::OracleCheckParams oracle_params;
    oracle->add_option("--tuples", oracle_params.n_tuples, "number of random tuples");
    oracle->add_option("--grid-points", oracle_params.grid_points, "integration grid size");
    oracle->add_option("--tolerance", oracle_params.tolerance, "max relative error");
    oracle->add_option("--oracle-seed", oracle_params.seed, "tuple generator seed");
    add_common(oracle, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) {
            auto config = load_with_overrides(config_path, seed_override);
            return dera::cmd_sweep(config, out_dir.empty() ? config.output_dir : out_dir,
                                   threads, std::cout);
        }
        if (bo->parsed()) {
            auto config = load_with_overrides(config_path, seed_override);
            return dera::cmd_bo(config, out_dir.empty() ? config.output_dir : out_dir, threads,
                                std::cout);
        }
        if (sample->parsed()) {
            auto config = load_with_overrides(config_path, seed_override);
            return dera::cmd_sample(config, out_dir.empty() ? config.output_dir : out_dir,
                                    threads, std::cout);
        }
        if (oracle->parsed()) {
            if (seed_override) oracle_params.seed = *seed_override;
            return dera::cmd_oracle_check(oracle_params, out_dir, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
