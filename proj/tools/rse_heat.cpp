#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "rse/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGateFailure = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    int workers = 0;
    bool skip_validate = false;
};

int resolve_workers(int cli_workers) {
    if (cli_workers > 0) return cli_workers;
    if (const char* env = std::getenv("RSE_HEAT_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<int>(v);
    }
    return 0;  // hardware concurrency
}

rse::ExperimentConfig load_config(const CommonOpts& opts) {
    rse::ExperimentConfig cfg = rse::ExperimentConfig::from_file(opts.config_path);
    if (opts.seed_override) cfg.master_seed = *opts.seed_override;
    return cfg;
}

std::string output_dir(const CommonOpts& opts, const rse::ExperimentConfig& cfg) {
    return opts.out_dir.empty() ? cfg.output_directory : opts.out_dir;
}

int run_validate(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    const auto outcome = rse::cmd_validate(cfg, output_dir(opts, cfg));
    std::cout << (outcome.pass ? "validation passed" : "validation FAILED") << "\n";
    return outcome.pass ? kExitOk : kExitGateFailure;
}

int run_simulate(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    const std::string dir = output_dir(opts, cfg);
    if (!opts.skip_validate) {
        const auto validation = rse::cmd_validate(cfg, dir);
        if (!validation.pass) {
            std::cerr << "validation failed; refusing to simulate (use --skip-validate to force)\n";
            return kExitGateFailure;
        }
    }
    rse::cmd_simulate(cfg, dir, resolve_workers(opts.workers));
    std::cout << "simulation complete: " << dir << "\n";
    return kExitOk;
}

int run_analyze(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    const std::string dir = output_dir(opts, cfg);
    const auto outcome = rse::cmd_analyze(cfg, dir, dir);
    std::cout << "a2_hat = " << outcome.report.a2_hat << " +/- " << outcome.report.se
              << ", C = " << outcome.report.lower_c << ", gates "
              << (outcome.gates_pass ? "pass" : "FAIL") << "\n";
    return outcome.gates_pass ? kExitOk : kExitGateFailure;
}

int run_full(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    const std::string dir = output_dir(opts, cfg);
    if (!opts.skip_validate) {
        const auto validation = rse::cmd_validate(cfg, dir);
        if (!validation.pass) {
            std::cerr << "validation failed\n";
            return kExitGateFailure;
        }
    }
    rse::cmd_simulate(cfg, dir, resolve_workers(opts.workers));
    const auto outcome = rse::cmd_analyze(cfg, dir, dir);
    std::cout << "a2_hat = " << outcome.report.a2_hat << " +/- " << outcome.report.se
              << ", C = " << outcome.report.lower_c << ", gates "
              << (outcome.gates_pass ? "pass" : "FAIL") << "\n";
    return outcome.gates_pass ? kExitOk : kExitGateFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Stochastic heat equation in a random environment: simulator and "
        "effective-variance estimators"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::uint64_t seed_value = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* cmd, bool with_workers) {
        cmd->add_option("--config", opts.config_path, "experiment configuration (JSON)")
            ->required();
        cmd->add_option("--out", opts.out_dir, "output directory (default: config output.directory)");
        cmd->add_option("--seed", seed_value, "master seed override")
            ->each([&](const std::string&) { seed_given = true; });
        if (with_workers) {
            cmd->add_option("--workers", opts.workers,
                            "worker threads (default: RSE_HEAT_WORKERS or hardware)");
            cmd->add_flag("--skip-validate", opts.skip_validate, "skip the validation stage");
        }
    };

    auto* validate = app.add_subcommand("validate", "run the environment validators");
    add_common(validate, false);
    auto* simulate = app.add_subcommand("simulate", "run the Monte Carlo ensemble");
    add_common(simulate, true);
    auto* analyze = app.add_subcommand("analyze", "estimate a^2 and its bounds from stats files");
    add_common(analyze, false);
    auto* full = app.add_subcommand("full", "validate, simulate and analyze");
    add_common(full, true);

    CLI11_PARSE(app, argc, argv);

    if (seed_given) opts.seed_override = seed_value;

    try {
        if (validate->parsed()) return run_validate(opts);
        if (simulate->parsed()) return run_simulate(opts);
        if (analyze->parsed()) return run_analyze(opts);
        if (full->parsed()) return run_full(opts);
    } catch (const rse::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const rse::StaleInputError& e) {
        std::cerr << "stale input: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGateFailure;
    }
    return kExitUsage;
}
