#include "rse/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rse {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double frac(double x) {
    double f = x - std::floor(x);
    if (f >= 1.0) f = 0.0;  // guard against floor rounding at the boundary
    return f;
}

/// Apply the precision matrix of the discrete Wiener vector,
/// Sigma0^{-1} = (1/dx) tridiag(-1, [3, 2, ..., 2, 1], -1).
/// The first diagonal entry is 2 when n == 1.
std::vector<double> precision_apply(const Grid& grid, const std::vector<double>& v) {
    const std::size_t n = grid.n_cells();
    std::vector<double> out(n);
    const double inv_dx = 1.0 / grid.dx();
    if (n == 1) {
        out[0] = 2.0 * inv_dx * v[0];
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double diag;
        if (i == 0) {
            diag = 3.0;
        } else if (i + 1 == n) {
            diag = 1.0;
        } else {
            diag = 2.0;
        }
        double acc = diag * v[i];
        if (i > 0) acc -= v[i - 1];
        if (i + 1 < n) acc -= v[i + 1];
        out[i] = inv_dx * acc;
    }
    return out;
}

}  // namespace

double BumpStream::value(double p, double q) const {
    const double s = ((p - cx) * (p - cx) + (q - cy) * (q - cy)) / (radius * radius);
    if (s >= 1.0) return 0.0;
    return amplitude * std::exp(1.0 - 1.0 / (1.0 - s));
}

void BumpStream::gradient(double p, double q, double& dp, double& dq) const {
    const double up = p - cx;
    const double uq = q - cy;
    const double s = (up * up + uq * uq) / (radius * radius);
    if (s >= 1.0) {
        dp = 0.0;
        dq = 0.0;
        return;
    }
    const double one_ms = 1.0 - s;
    // d/ds exp(1 - 1/(1-s)) = -exp(...) / (1-s)^2
    const double gprime = -std::exp(1.0 - 1.0 / one_ms) / (one_ms * one_ms);
    const double scale = amplitude * gprime * 2.0 / (radius * radius);
    dp = scale * up;
    dq = scale * uq;
}

double BumpStream::gradient_bound() const {
    // |d chi / dp| <= (2 amp / r) * max_s |g'(s)| sqrt(s); the max is a
    // fixed constant of the bump profile, found on a fine grid.
    double best = 0.0;
    const int n = 4096;
    for (int i = 1; i < n; ++i) {
        const double s = static_cast<double>(i) / n;
        const double one_ms = 1.0 - s;
        const double g = std::exp(1.0 - 1.0 / one_ms) / (one_ms * one_ms);
        best = std::max(best, g * std::sqrt(s));
    }
    return 2.0 * amplitude / radius * best;
}

EnvModel::EnvModel(EnvKind kind, std::shared_ptr<const Grid> grid, PotentialSpec potential,
                   std::optional<DivFreeSpec> divfree)
    : kind_(kind), grid_(std::move(grid)), potential_(std::move(potential)),
      divfree_(std::move(divfree)) {
    if (potential_.frequencies.empty()) {
        throw ConfigError("EnvModel: at least one environment coordinate required");
    }
    if (potential_.coord_modes.size() != potential_.frequencies.size()) {
        throw ConfigError("EnvModel: one mode list per environment coordinate required");
    }
    for (std::size_t c = 0; c < potential_.coord_modes.size(); ++c) {
        for (const auto& pm : potential_.coord_modes[c]) {
            if (pm.m <= 0) throw ConfigError("EnvModel: potential mode index m must be positive");
            ModeData md;
            md.coord = c;
            md.two_pi_m = kTwoPi * pm.m;
            md.amplitude = pm.amplitude;
            md.phase = pm.phase;
            md.lambda = potential_.frequencies[c];
            if (pm.profile == XProfile::Cosine) {
                md.w.resize(grid_->n_cells());
                for (std::size_t i = 0; i < grid_->n_cells(); ++i) {
                    md.w[i] = std::cos(pm.profile_j * std::numbers::pi * grid_->center(i));
                }
            }
            modes_.push_back(std::move(md));
        }
    }
    if (divfree_ && divfree_->kind == DriftKind::Stream) build_divfree();
    compute_envelopes();
}

EnvModel EnvModel::zero(std::shared_ptr<const Grid> grid) {
    PotentialSpec spec;
    spec.frequencies = {1.0};
    spec.coord_modes.resize(1);
    return EnvModel(EnvKind::Zero, std::move(grid), std::move(spec), std::nullopt);
}

EnvModel EnvModel::periodic(std::shared_ptr<const Grid> grid, PotentialSpec potential,
                            std::optional<DivFreeSpec> divfree) {
    if (potential.frequencies.empty()) potential.frequencies = {1.0};
    if (potential.frequencies.size() != 1) {
        throw ConfigError("periodic environment has exactly one coordinate");
    }
    if (potential.coord_modes.empty()) potential.coord_modes.resize(1);
    return EnvModel(EnvKind::Periodic, std::move(grid), std::move(potential), std::move(divfree));
}

EnvModel EnvModel::quasi_periodic(std::shared_ptr<const Grid> grid, PotentialSpec potential,
                                  std::optional<DivFreeSpec> divfree) {
    if (potential.frequencies.size() < 2) {
        throw ConfigError("quasi-periodic environment needs dimension >= 2");
    }
    return EnvModel(EnvKind::QuasiPeriodic, std::move(grid), std::move(potential),
                    std::move(divfree));
}

void EnvModel::build_divfree() {
    const auto& spec = *divfree_;
    if (spec.mode1 == spec.mode2) throw ConfigError("divfree: stream modes must differ");
    if (spec.mode1 < 0 || spec.mode2 < 0 ||
        spec.mode1 >= static_cast<int>(grid_->n_cells()) ||
        spec.mode2 >= static_cast<int>(grid_->n_cells())) {
        throw ConfigError("divfree: stream mode index out of range for the grid");
    }
    if (spec.chi.radius <= 0.0) throw ConfigError("divfree: stream radius must be positive");

    // Sampled cosine modes with the first-cell value forced to zero, then
    // re-orthonormalized. Zero first cell keeps the Gaussian scores
    // invariant under u -> u + c (Sigma0^{-1} 1 is supported there).
    Field raw1 = grid_->mode(static_cast<std::size_t>(spec.mode1));
    Field raw2 = grid_->mode(static_cast<std::size_t>(spec.mode2));
    raw1[0] = 0.0;
    raw2[0] = 0.0;
    const double n1 = norm_h(*grid_, raw1);
    if (n1 <= 0.0) throw ConfigError("divfree: first stream field degenerates to zero");
    k1_ = raw1;
    for (auto& x : k1_) x /= n1;
    const double proj = inner_h(*grid_, raw2, k1_);
    k2_ = raw2;
    for (std::size_t i = 0; i < k2_.size(); ++i) k2_[i] -= proj * k1_[i];
    const double n2 = norm_h(*grid_, k2_);
    if (n2 <= 1e-12) throw ConfigError("divfree: stream fields are linearly dependent");
    for (auto& x : k2_) x /= n2;
    k1_[0] = 0.0;  // exact, not just up to roundoff
    k2_[0] = 0.0;

    s1_ = precision_apply(*grid_, k1_);
    s2_ = precision_apply(*grid_, k2_);
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    };
    gram_[0][0] = dot(s1_, k1_);
    gram_[0][1] = dot(s1_, k2_);
    gram_[1][0] = dot(s2_, k1_);
    gram_[1][1] = dot(s2_, k2_);
}

void EnvModel::compute_envelopes() {
    double sup_v = 0.0;
    std::vector<double> sup_dv_per_coord(dimension(), 0.0);
    std::vector<double> lip_per_coord(dimension(), 0.0);
    for (const auto& md : modes_) {
        const double a = std::abs(md.amplitude);
        sup_v += a;
        sup_dv_per_coord[md.coord] += a * md.two_pi_m;
        lip_per_coord[md.coord] += a * md.two_pi_m * md.two_pi_m;
    }
    sup_v_ = sup_v;
    sup_dv_ = 0.0;
    lip_dv_ = 0.0;
    for (std::size_t c = 0; c < dimension(); ++c) {
        const double lam = std::abs(potential_.frequencies[c]);
        sup_dv_ += lam * sup_dv_per_coord[c];
        lip_dv_ += lam * lam * lip_per_coord[c];
    }

    sup_b_ = 0.0;
    if (divfree_) {
        if (divfree_->kind == DriftKind::GradientImposter) {
            sup_b_ = sup_dv_;
        } else if (divfree_->kind == DriftKind::Stream) {
            const auto& chi = divfree_->chi;
            const double gb = chi.gradient_bound();
            const double sup_chi = std::abs(chi.amplitude);
            const double l1_max = std::abs(chi.cx) + chi.radius;
            const double l2_max = std::abs(chi.cy) + chi.radius;
            const double coef_on_k1 =
                gb * (std::abs(gram_[0][1]) + std::abs(gram_[1][1])) + l2_max * sup_chi;
            const double coef_on_k2 =
                gb * (std::abs(gram_[0][0]) + std::abs(gram_[1][0])) + l1_max * sup_chi;
            sup_b_ = std::exp(2.0 * sup_v_) *
                     std::sqrt(coef_on_k1 * coef_on_k1 + coef_on_k2 * coef_on_k2);
        }
    }
}

EnvPoint sample_env(const EnvModel& model, RngStream& rng) {
    EnvPoint sigma;
    sigma.phases.resize(model.dimension());
    for (auto& p : sigma.phases) p = rng.uniform01();
    return sigma;
}

double eval_V(const EnvModel& model, const EnvPoint& sigma, const Field& u) {
    model.grid_->require_conforming(u, "eval_V");
    if (sigma.phases.size() != model.dimension()) {
        throw ConformityError("eval_V: environment point dimension mismatch");
    }
    const std::size_t n = u.size();
    double acc = 0.0;
    for (const auto& md : model.modes_) {
        const double base = md.two_pi_m * sigma.phases[md.coord] + md.phase;
        const double rate = md.two_pi_m * md.lambda;
        double sum = 0.0;
        if (md.w.empty()) {
            for (std::size_t i = 0; i < n; ++i) sum += std::cos(rate * u[i] + base);
        } else {
            for (std::size_t i = 0; i < n; ++i) sum += md.w[i] * std::cos(rate * u[i] + base);
        }
        acc += md.amplitude * sum;
    }
    return acc * model.grid_->dx();
}

void eval_DV(const EnvModel& model, const EnvPoint& sigma, const Field& u, Field& out) {
    model.grid_->require_conforming(u, "eval_DV");
    if (sigma.phases.size() != model.dimension()) {
        throw ConformityError("eval_DV: environment point dimension mismatch");
    }
    const std::size_t n = u.size();
    out.assign(n, 0.0);
    for (const auto& md : model.modes_) {
        const double base = md.two_pi_m * sigma.phases[md.coord] + md.phase;
        const double rate = md.two_pi_m * md.lambda;
        const double coeff = -md.amplitude * md.lambda * md.two_pi_m;
        if (md.w.empty()) {
            for (std::size_t i = 0; i < n; ++i) out[i] += coeff * std::sin(rate * u[i] + base);
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                out[i] += coeff * md.w[i] * std::sin(rate * u[i] + base);
            }
        }
    }
}

Field eval_DV(const EnvModel& model, const EnvPoint& sigma, const Field& u) {
    Field out;
    eval_DV(model, sigma, u, out);
    return out;
}

void eval_B(const EnvModel& model, const EnvPoint& sigma, const Field& u, Field& out) {
    model.grid_->require_conforming(u, "eval_B");
    const std::size_t n = u.size();
    if (!model.divfree_) {
        out.assign(n, 0.0);
        return;
    }
    if (model.divfree_->kind == DriftKind::GradientImposter) {
        eval_DV(model, sigma, u, out);
        return;
    }
    out.assign(n, 0.0);
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        l1 += model.s1_[i] * u[i];
        l2 += model.s2_[i] * u[i];
    }
    const auto& chi = model.divfree_->chi;
    const double psi = chi.value(l1, l2);
    double dchi_p = 0.0, dchi_q = 0.0;
    chi.gradient(l1, l2, dchi_p, dchi_q);
    if (psi == 0.0 && dchi_p == 0.0 && dchi_q == 0.0) return;  // outside the bump support

    const double dpsi_k1 = dchi_p * model.gram_[0][0] + dchi_q * model.gram_[1][0];
    const double dpsi_k2 = dchi_p * model.gram_[0][1] + dchi_q * model.gram_[1][1];
    const double gain = std::exp(2.0 * eval_V(model, sigma, u));
    const double a = gain * (dpsi_k2 - l2 * psi);
    const double b = -gain * (dpsi_k1 - l1 * psi);
    for (std::size_t i = 0; i < n; ++i) out[i] = a * model.k1_[i] + b * model.k2_[i];
}

Field eval_B(const EnvModel& model, const EnvPoint& sigma, const Field& u) {
    Field out;
    eval_B(model, sigma, u, out);
    return out;
}

EnvPoint shift_env(const EnvModel& model, const EnvPoint& sigma, double c) {
    if (sigma.phases.size() != model.dimension()) {
        throw ConformityError("shift_env: environment point dimension mismatch");
    }
    EnvPoint out;
    out.phases.resize(sigma.phases.size());
    for (std::size_t i = 0; i < sigma.phases.size(); ++i) {
        out.phases[i] = frac(sigma.phases[i] + model.potential_.frequencies[i] * c);
    }
    return out;
}

std::vector<ExpTestFn> default_exp_battery(const Grid& grid, std::size_t count) {
    std::vector<ExpTestFn> fns;
    fns.reserve(count);
    for (std::size_t j = 0; fns.size() < count; ++j) {
        const std::size_t mode = j % grid.n_cells();
        ExpTestFn re;
        re.h = grid.mode(mode);
        re.imaginary = false;
        re.label = "cos<v,e" + std::to_string(mode) + ">";
        fns.push_back(std::move(re));
        if (fns.size() == count) break;
        ExpTestFn im;
        im.h = grid.mode(mode);
        im.imaginary = true;
        im.label = "sin<v,e" + std::to_string(mode) + ">";
        fns.push_back(std::move(im));
    }
    return fns;
}

std::vector<DivergenceEstimate> verify_divergence_free(const EnvModel& model,
                                                       const EnvPoint& sigma,
                                                       const std::vector<ExpTestFn>& test_fns,
                                                       std::size_t n_samples, RngStream& rng) {
    if (n_samples < 100) {
        throw ConfigError("verify_divergence_free: need at least 100 samples");
    }
    const Grid& grid = model.grid();
    const std::size_t m = test_fns.size();
    std::vector<double> sum(m, 0.0), sum_sq(m, 0.0);
    Field b;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const Field v = sample_wiener_shape(grid, rng);
        eval_B(model, sigma, v, b);
        const double weight = std::exp(-2.0 * eval_V(model, sigma, v));
        for (std::size_t t = 0; t < m; ++t) {
            const auto& fn = test_fns[t];
            const double vh = inner_h(grid, v, fn.h);
            const double hb = inner_h(grid, fn.h, b);
            // <Df, B> with Df = -sin(<v,h>) h (real part) or cos(<v,h>) h.
            const double trig = fn.imaginary ? std::cos(vh) : -std::sin(vh);
            const double val = weight * trig * hb;
            sum[t] += val;
            sum_sq[t] += val * val;
        }
    }
    std::vector<DivergenceEstimate> out(m);
    const double nd = static_cast<double>(n_samples);
    for (std::size_t t = 0; t < m; ++t) {
        const double mu = sum[t] / nd;
        const double var = std::max(0.0, sum_sq[t] / nd - mu * mu);
        out[t].estimate = mu;
        out[t].standard_error = std::sqrt(var / nd);
        out[t].label = test_fns[t].label;
    }
    return out;
}

double verify_shift_covariance(const EnvModel& model, const EnvPoint& sigma, const Field& u,
                               double c) {
    const EnvPoint shifted = shift_env(model, sigma, c);
    Field u_plus = u;
    for (auto& x : u_plus) x += c;

    double worst = std::abs(eval_V(model, sigma, u_plus) - eval_V(model, shifted, u));

    const Field dv_a = eval_DV(model, sigma, u_plus);
    const Field dv_b = eval_DV(model, shifted, u);
    for (std::size_t i = 0; i < u.size(); ++i) {
        worst = std::max(worst, std::abs(dv_a[i] - dv_b[i]));
    }

    const Field b_a = eval_B(model, sigma, u_plus);
    const Field b_b = eval_B(model, shifted, u);
    for (std::size_t i = 0; i < u.size(); ++i) {
        worst = std::max(worst, std::abs(b_a[i] - b_b[i]));
    }
    return worst;
}

AssumptionReport assumption_report(const EnvModel& model, std::size_t n_samples, RngStream& rng) {
    AssumptionReport report;
    report.declared_sup_v = model.sup_v();
    report.declared_sup_dv = model.sup_dv();
    report.declared_sup_b = model.sup_b();
    report.declared_lipschitz_dv = model.lipschitz_dv();

    const Grid& grid = model.grid();
    Field dv, dv2, b;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const EnvPoint sigma = sample_env(model, rng);
        Field u = sample_wiener_shape(grid, rng);
        const double offset = rng.uniform01();
        for (auto& x : u) x += offset;
        const Field u2 = sample_wiener_shape(grid, rng);

        report.sampled_sup_v = std::max(report.sampled_sup_v, std::abs(eval_V(model, sigma, u)));
        eval_DV(model, sigma, u, dv);
        report.sampled_sup_dv = std::max(report.sampled_sup_dv, norm_h(grid, dv));
        eval_B(model, sigma, u, b);
        report.sampled_sup_b = std::max(report.sampled_sup_b, norm_h(grid, b));

        eval_DV(model, sigma, u2, dv2);
        double diff_sq = 0.0, dist_sq = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            diff_sq += (dv[i] - dv2[i]) * (dv[i] - dv2[i]);
            dist_sq += (u[i] - u2[i]) * (u[i] - u2[i]);
        }
        if (dist_sq > 0.0) {
            report.sampled_lipschitz_dv =
                std::max(report.sampled_lipschitz_dv, std::sqrt(diff_sq / dist_sq));
        }
    }

    const double slack = 1e-9;
    report.ok = report.sampled_sup_v <= report.declared_sup_v + slack &&
                report.sampled_sup_dv <= report.declared_sup_dv + slack &&
                report.sampled_sup_b <= report.declared_sup_b + slack &&
                report.sampled_lipschitz_dv <= report.declared_lipschitz_dv + slack;
    return report;
}

}  // namespace rse
