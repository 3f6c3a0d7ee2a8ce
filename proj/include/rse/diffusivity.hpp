#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rse/ensemble.hpp"
#include "rse/environment.hpp"

namespace rse {

/// Importance-sampling proposal for the invariant measure pi: shape from
/// the discrete Wiener measure, base phase from Q, weight e^{-2 V}.
struct PiSample {
    Field v;
    EnvPoint sigma;
    double weight = 1.0;
};

struct PiEnsemble {
    std::vector<PiSample> samples;
    double z_hat = 1.0;  // normalization estimate, mean weight
    double z_se = 0.0;
};

PiEnsemble sample_pi(const EnvModel& model, std::size_t n, RngStream& rng);

struct SlopeEstimate {
    double a2_hat = 0.0;
    double se = 0.0;
    double intercept = 0.0;
    int checkpoints_used = 0;
};

/// Long-time slope of pooled E[mean_mode(t)^2] against t over post-burn-in
/// checkpoints (weighted least squares with an intercept; the martingale
/// correction is O(1)). SE from a 200-resample environment bootstrap.
SlopeEstimate estimate_a2_slope(const EnsembleStats& stats, double burn_in_fraction);

struct LowerBound {
    double c = 1.0;
    double se = 0.0;
};

/// Theorem bound C = exp(-2 sup|V|) / Z with Z from sample_pi.
LowerBound lower_bound_C(const EnvModel& model, const PiEnsemble& pi);

/// Shift-invariant cylinder trial functions
///   f_theta(sigma, v) = dx sum_i sum_{m<=M} theta_{2m} cos(2 pi m (v_i + sigma))
///                                   + theta_{2m+1} sin(2 pi m (v_i + sigma)).
struct TrialFamily {
    int n_modes = 4;  // M
};

struct VariationalResult {
    double bound = 1.0;
    double se = 0.0;
    std::vector<double> theta;
    bool ill_conditioned = false;
};

/// Minimize E_pi || D f_theta + 1 ||_H^2 over theta by solving the normal
/// equations on the importance sample. Upper bound for a^2 when B = 0.
VariationalResult variational_bound(const EnvModel& model, const TrialFamily& trial,
                                    const PiEnsemble& pi);

struct DiffusivityReport {
    double a2_hat = 0.0;
    double se = 0.0;
    double lower_c = 1.0;
    double lower_c_se = 0.0;
    double upper = 1.0;
    std::optional<double> variational = std::nullopt;
    std::optional<double> variational_se = std::nullopt;
    std::string method;
};

struct EnhancementResult {
    double a2_with_b = 0.0;
    double se_with_b = 0.0;
    double a2_gradient = 0.0;
    double se_gradient = 0.0;
    double margin = 0.0;       // a2(V,B) - a2(V,0)
    double combined_se = 0.0;
};

/// Compare the effective variance with and without the divergence-free
/// drift over a shared potential. Refuses when B fails the divergence
/// validator. Precomputed gradient-model stats may be supplied to avoid
/// rerunning the shared baseline.
EnhancementResult enhancement_check(const EnvModel& model_gradient, const EnvModel& model_with_b,
                                    const EnsembleConfig& config,
                                    const EnsembleStats* gradient_stats = nullptr);

/// Cylinder functions f(v) = g(<v,h>_H) for the Poincare property check.
struct CylinderFn {
    enum class Kind { Linear, CosInner, SinInner, ExpNegSq, Constant };
    Kind kind = Kind::Linear;
    Field h;
    double constant = 0.0;
    std::string label;
};

struct PoincareRow {
    std::string label;
    double variance = 0.0;
    double variance_se = 0.0;
    double gradient_energy = 0.0;
    double gradient_energy_se = 0.0;
    bool pass = false;
};

/// Monte Carlo check of Var_{mu0}(f) <= E_{mu0} ||Df||_H^2 (+ 3 SE).
std::vector<PoincareRow> poincare_check(const Grid& grid, const std::vector<CylinderFn>& battery,
                                        std::size_t n_samples, RngStream& rng);

}  // namespace rse
