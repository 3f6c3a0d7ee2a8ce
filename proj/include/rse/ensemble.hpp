#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rse/dynamics.hpp"
#include "rse/environment.hpp"

namespace rse {

/// Nested Monte Carlo layout: outer replicas draw environments (law Q),
/// inner replicas drive independent noise (law P).
struct EnsembleConfig {
    int n_env = 2;
    int n_noise = 2;
    double dt = 1e-3;
    std::vector<double> checkpoints;
    std::uint64_t master_seed = 0;
    Scheme scheme = Scheme::SemiImplicit;
    double initial_constant = 0.0;
    int workers = 0;  // 0: hardware concurrency
    std::array<double, 3> probe_positions{0.1, 0.5, 0.9};
};

struct ReplicaSample {
    double mean_mode = 0.0;
    double fluct_normsq = 0.0;
    std::array<double, 3> probe_dev{};  // u(t, x_p) - mean_mode
};

struct CheckpointStats {
    double t = 0.0;
    std::vector<ReplicaSample> samples;  // indexed e * n_noise + w

    // Fixed-order aggregates.
    double var_mean_mode = 0.0;
    double var_mean_mode_se = 0.0;
    std::array<double, 3> fluct_var_cell{};
    double mean_fluct_normsq = 0.0;
    double mean_fluct_normsq_se = 0.0;
};

struct EnsembleStats {
    int n_env = 0;
    int n_noise = 0;
    std::uint64_t master_seed = 0;
    std::array<std::size_t, 3> probe_cells{};
    std::vector<CheckpointStats> checkpoints;

    const ReplicaSample& sample(std::size_t ckpt, int e, int w) const {
        return checkpoints[ckpt].samples[static_cast<std::size_t>(e) * n_noise + w];
    }
};

/// Run the full (environment x noise) ensemble. Bit-identical results for
/// a fixed master seed regardless of worker count: every replica owns a
/// derived stream and aggregation folds in replica order.
EnsembleStats run_ensemble(const EnsembleConfig& config, const EnvModel& model);

/// Recompute per-checkpoint aggregates from raw samples (fixed order).
void aggregate_checkpoint(CheckpointStats& ckpt, int n_env, int n_noise);

/// Bounded Lipschitz functionals of w = u(t)/sqrt(t), each a function of
/// the mean mode <w,1>_H and the fluctuation norm ||w - <w,1> 1||_H.
class BoundedFunctional {
public:
    enum class Kind { CosMean, ExpMeanSq, MinNorm, InvFluct, ConstOne };

    static BoundedFunctional by_name(const std::string& name);
    static std::vector<BoundedFunctional> default_battery();

    double eval(double mean, double fluct_sq) const;
    /// f evaluated on the constant field 1 * y (fluctuation part zero).
    double profile(double y) const;
    /// Gaussian reference integral f(1 y) against Phi_a, 64-point
    /// Gauss-Hermite quadrature.
    double reference(double a) const;
    const std::string& name() const { return name_; }

private:
    BoundedFunctional(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}
    Kind kind_;
    std::string name_;
};

struct CltMetricSeries {
    std::vector<double> t;                         // positive checkpoint times
    std::vector<std::string> member_names;
    std::vector<std::vector<double>> metric;       // [time][member]
    std::vector<std::vector<double>> noise_floor;  // [time][member]
};

/// Per-checkpoint L1-over-environment distance between inner averages of
/// each functional and its Gaussian reference with std a.
CltMetricSeries clt_l1_metric(const EnsembleStats& stats,
                              const std::vector<BoundedFunctional>& battery, double a);

struct KsResult {
    double d_n = 0.0;
    double threshold = 0.0;  // simulated 1% null quantile for the sample count
    bool pass = false;
    std::size_t n_samples = 0;
};

/// Kolmogorov-Smirnov test of samples against N(0, a^2) at the 1% level,
/// with the null quantile simulated at matched sample count.
KsResult ks_gaussianity(const std::vector<double>& samples, double a);

struct ConcentrationSeries {
    std::vector<double> t;
    std::vector<double> sup_cell_fluct_var;  // max over probe cells
    std::vector<double> var_mean_mode;
};

/// Concentration-on-constants diagnostics: bounded fluctuation variance
/// against diffusive growth of the mean mode.
ConcentrationSeries concentration_stats(const EnsembleStats& stats);

/// Ratio of series values at the checkpoints nearest t_hi and t_lo.
double series_ratio(const std::vector<double>& t, const std::vector<double>& values, double t_lo,
                    double t_hi);

}  // namespace rse
