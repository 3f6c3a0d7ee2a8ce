#pragma once

#include <string>

#include "rse/config.hpp"
#include "rse/diffusivity.hpp"

namespace rse {

struct ValidationOutcome {
    bool pass = false;
    nlohmann::json report;
};

/// Run the assumption validators and write validation.json. The process
/// exit status of the CLI mirrors `pass`.
ValidationOutcome cmd_validate(const ExperimentConfig& config, const std::string& out_dir);

/// Run the ensemble and write checkpoints.csv, samples.csv,
/// fluct_samples.csv and run_meta.json. Partial outputs are removed when a
/// trajectory blows up. Returns the in-memory stats.
EnsembleStats cmd_simulate(const ExperimentConfig& config, const std::string& out_dir,
                           int workers = 0);

struct AnalyzeOutcome {
    bool gates_pass = false;
    DiffusivityReport report;
    KsResult ks;
    nlohmann::json gates;
};

/// Read the stats files back (refusing a config-hash mismatch), estimate
/// the effective variance and its bounds, and write diffusivity.json,
/// clt_metric.csv, ks.json, gates.json and plotdata/*.csv.
AnalyzeOutcome cmd_analyze(const ExperimentConfig& config, const std::string& stats_dir,
                           const std::string& out_dir);

}  // namespace rse
