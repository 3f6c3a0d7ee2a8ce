#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rse/dynamics.hpp"
#include "rse/ensemble.hpp"
#include "rse/environment.hpp"

namespace rse {

/// Declarative experiment description, read from a single JSON document.
/// Unknown keys are rejected and every numeric field is range-checked, so
/// a config hash pins the run unambiguously.
struct ExperimentConfig {
    // environment
    EnvKind env_kind = EnvKind::Zero;
    PotentialSpec potential;
    std::optional<DivFreeSpec> divfree;

    // grid
    std::size_t n_cells = 64;

    // dynamics
    double dt = 1e-3;
    double horizon = 20.0;
    std::vector<double> checkpoints;  // defaulted to 10 even slices of T
    Scheme scheme = Scheme::SemiImplicit;

    // ensemble
    int n_env = 2;
    int n_noise = 2;
    std::uint64_t master_seed = 1;

    // analysis
    std::vector<std::string> f_battery;  // empty: default battery
    int trial_modes = 4;
    double burn_in_fraction = 0.2;
    std::size_t pi_samples = 100000;

    // output
    std::string output_directory = "out";

    static ExperimentConfig from_json(const nlohmann::json& doc);
    static ExperimentConfig from_file(const std::string& path);

    /// Canonical echo with sorted keys; the basis of the config hash.
    nlohmann::json to_json() const;
    std::string canonical_dump() const;
    /// FNV-1a over the canonical dump.
    std::uint64_t hash() const;

    EnsembleConfig ensemble_config(int workers = 0) const;
    std::vector<BoundedFunctional> battery() const;
};

std::shared_ptr<const Grid> make_grid(const ExperimentConfig& config);
EnvModel make_model(const ExperimentConfig& config, std::shared_ptr<const Grid> grid);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace rse
