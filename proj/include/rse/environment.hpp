#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rse/grid.hpp"
#include "rse/rng.hpp"

namespace rse {

enum class EnvKind { Zero, Periodic, QuasiPeriodic };

enum class XProfile { Constant, Cosine };

/// One potential mode kappa * w(x) * cos(2 pi m y + theta), with
/// w = 1 (Constant) or w(x) = cos(j pi x) (Cosine).
struct PotentialMode {
    int m = 1;
    double amplitude = 0.0;
    double phase = 0.0;
    XProfile profile = XProfile::Constant;
    int profile_j = 0;
};

/// Potential V(x, y) = sum over coordinates c and modes of
/// kappa w(x) cos(2 pi m y_c + theta). Period 1 in every y-coordinate by
/// construction; sum |kappa| finite gives the sup |V| envelope.
struct PotentialSpec {
    std::vector<std::vector<PotentialMode>> coord_modes;  // one list per coordinate
    std::vector<double> frequencies;                      // lambda; {1} for periodic

    std::size_t dimension() const { return frequencies.size(); }
};

/// How the drift field B is realized.
enum class DriftKind {
    None,              // B = 0 (gradient-type environment)
    Stream,            // constructive divergence-free drift
    GradientImposter,  // B := DV, deliberately not divergence-free; for validator tests
};

/// Smooth compactly supported bump on the plane:
/// chi(p,q) = amp * exp(1 - 1/(1-s)) with s = ((p-cx)^2 + (q-cy)^2)/r^2 < 1.
struct BumpStream {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 1.0;
    double amplitude = 1.0;

    double value(double p, double q) const;
    void gradient(double p, double q, double& dp, double& dq) const;
    /// sup |d chi / dp| over the plane (same bound for q).
    double gradient_bound() const;
};

struct DivFreeSpec {
    int mode1 = 1;  // direction indices of the two stream fields
    int mode2 = 2;
    BumpStream chi;
    DriftKind kind = DriftKind::Stream;
};

/// A realization of the random environment: the shift coordinate sigma.
struct EnvPoint {
    std::vector<double> phases;  // each in [0,1); one per coordinate
};

/// Exponential-class test function f_h(v) = Re or Im of exp(i <v,h>_H)
/// with h a cosine polynomial (zero Neumann derivative at both ends).
struct ExpTestFn {
    Field h;
    bool imaginary = false;  // false: cos <v,h>; true: sin <v,h>
    std::string label;
};

struct DivergenceEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::string label;
};

struct AssumptionReport {
    double sampled_sup_v = 0.0;
    double declared_sup_v = 0.0;
    double sampled_sup_dv = 0.0;
    double declared_sup_dv = 0.0;
    double sampled_sup_b = 0.0;
    double declared_sup_b = 0.0;
    double sampled_lipschitz_dv = 0.0;
    double declared_lipschitz_dv = 0.0;
    bool ok = false;
};

/// A random environment model over a fixed grid: the potential V, its
/// H-gradient DV, the drift B, and the shift action tau_c. All evaluators
/// are pure functions of (sigma, u); the model itself is immutable.
class EnvModel {
public:
    /// Zero environment: V = 0, B = 0 (free field).
    static EnvModel zero(std::shared_ptr<const Grid> grid);

    /// Periodic environment (environment coordinate is a single phase).
    static EnvModel periodic(std::shared_ptr<const Grid> grid, PotentialSpec potential,
                             std::optional<DivFreeSpec> divfree = std::nullopt);

    /// Quasi-periodic environment with rationally independent frequencies.
    static EnvModel quasi_periodic(std::shared_ptr<const Grid> grid, PotentialSpec potential,
                                   std::optional<DivFreeSpec> divfree = std::nullopt);

    EnvKind kind() const { return kind_; }
    const Grid& grid() const { return *grid_; }
    std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
    const PotentialSpec& potential() const { return potential_; }
    std::size_t dimension() const { return potential_.frequencies.size(); }
    DriftKind drift_kind() const { return divfree_ ? divfree_->kind : DriftKind::None; }
    bool has_drift() const { return drift_kind() != DriftKind::None; }

    // Boundedness envelopes implied by the mode amplitudes.
    double sup_v() const { return sup_v_; }
    double sup_dv() const { return sup_dv_; }
    double sup_b() const { return sup_b_; }
    double lipschitz_dv() const { return lip_dv_; }

    /// Stream fields of the divergence-free construction (unit H-norm,
    /// mutually H-orthogonal, first-cell value exactly zero).
    const Field& stream_field(int which) const { return which == 0 ? k1_ : k2_; }
    /// Gaussian score of the stream field: l_i(u) = <scores_i, u> (Euclidean).
    const std::vector<double>& score_vector(int which) const { return which == 0 ? s1_ : s2_; }

    friend EnvPoint sample_env(const EnvModel&, RngStream&);
    friend double eval_V(const EnvModel&, const EnvPoint&, const Field&);
    friend void eval_DV(const EnvModel&, const EnvPoint&, const Field&, Field&);
    friend void eval_B(const EnvModel&, const EnvPoint&, const Field&, Field&);
    friend EnvPoint shift_env(const EnvModel&, const EnvPoint&, double);

private:
    EnvModel(EnvKind kind, std::shared_ptr<const Grid> grid, PotentialSpec potential,
             std::optional<DivFreeSpec> divfree);

    void build_divfree();
    void compute_envelopes();

    EnvKind kind_;
    std::shared_ptr<const Grid> grid_;
    PotentialSpec potential_;
    std::optional<DivFreeSpec> divfree_;

    // Per-mode x-profile sampled at cell centers; empty for constant profiles.
    struct ModeData {
        std::size_t coord;
        double two_pi_m;
        double amplitude;
        double phase;
        double lambda;          // frequency of the owning coordinate
        std::vector<double> w;  // empty means w == 1
    };
    std::vector<ModeData> modes_;

    // Divergence-free construction data.
    Field k1_, k2_;
    std::vector<double> s1_, s2_;  // s_i = Sigma0^{-1} k_i (Euclidean vectors)
    std::array<std::array<double, 2>, 2> gram_{};  // G[j][i] = <s_j, k_i>

    double sup_v_ = 0.0, sup_dv_ = 0.0, sup_b_ = 0.0, lip_dv_ = 0.0;
};

/// Draw sigma ~ Q: independent uniform phases on [0,1) per coordinate.
EnvPoint sample_env(const EnvModel& model, RngStream& rng);

/// V(sigma, u) = dx sum_i V(x_i, lambda u_i + sigma).
double eval_V(const EnvModel& model, const EnvPoint& sigma, const Field& u);

/// H-gradient of V: (DV)_i = sum_c lambda_c d_{y_c} V(x_i, lambda u_i + sigma).
Field eval_DV(const EnvModel& model, const EnvPoint& sigma, const Field& u);
void eval_DV(const EnvModel& model, const EnvPoint& sigma, const Field& u, Field& out);

/// Divergence-free drift. Zero when no drift is configured.
Field eval_B(const EnvModel& model, const EnvPoint& sigma, const Field& u);
void eval_B(const EnvModel& model, const EnvPoint& sigma, const Field& u, Field& out);

/// Shift action tau_c: phases advance by frac(lambda_c * c).
EnvPoint shift_env(const EnvModel& model, const EnvPoint& sigma, double c);

/// Default battery: cos/sin exponential functions over the first
/// `count/2` cosine modes (including the constant).
std::vector<ExpTestFn> default_exp_battery(const Grid& grid, std::size_t count = 10);

/// Monte Carlo check of the divergence-free identity
/// E_{mu0}[ e^{-2V(sigma,v)} <Df(v), B(sigma,v)>_H ] = 0 per test function.
std::vector<DivergenceEstimate> verify_divergence_free(const EnvModel& model,
                                                       const EnvPoint& sigma,
                                                       const std::vector<ExpTestFn>& test_fns,
                                                       std::size_t n_samples, RngStream& rng);

/// Max absolute discrepancy of V, DV, B between (sigma, u + c) and
/// (tau_c sigma, u).
double verify_shift_covariance(const EnvModel& model, const EnvPoint& sigma, const Field& u,
                               double c);

/// Sampled sup/Lipschitz statistics versus the declared envelopes.
AssumptionReport assumption_report(const EnvModel& model, std::size_t n_samples, RngStream& rng);

}  // namespace rse
