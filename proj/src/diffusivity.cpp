#include "rse/diffusivity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rse/stats.hpp"

namespace rse {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Per-checkpoint per-environment inner means of mean_mode^2.
std::vector<std::vector<double>> second_moment_by_env(const EnsembleStats& stats) {
    std::vector<std::vector<double>> m2(stats.checkpoints.size());
    for (std::size_t c = 0; c < stats.checkpoints.size(); ++c) {
        m2[c].resize(stats.n_env);
        for (int e = 0; e < stats.n_env; ++e) {
            double acc = 0.0;
            for (int w = 0; w < stats.n_noise; ++w) {
                const double m = stats.sample(c, e, w).mean_mode;
                acc += m * m;
            }
            m2[c][e] = acc / stats.n_noise;
        }
    }
    return m2;
}

SlopeEstimate fit_slope(const std::vector<double>& times,
                        const std::vector<std::vector<double>>& m2_env,
                        const std::vector<std::size_t>& used, const std::vector<int>& env_ids) {
    std::vector<double> x, y, w;
    for (std::size_t idx : used) {
        double acc = 0.0;
        for (int e : env_ids) acc += m2_env[idx][e];
        const double mean_val = acc / static_cast<double>(env_ids.size());
        double var_acc = 0.0;
        for (int e : env_ids) {
            var_acc += (m2_env[idx][e] - mean_val) * (m2_env[idx][e] - mean_val);
        }
        const double se_sq = var_acc / (static_cast<double>(env_ids.size()) *
                                        std::max<double>(1.0, env_ids.size() - 1));
        x.push_back(times[idx]);
        y.push_back(mean_val);
        w.push_back(se_sq > 0.0 ? 1.0 / se_sq : 1.0);
    }
    // Guard against one checkpoint dominating through a tiny bootstrap SE.
    const double w_cap = 1e12 * *std::min_element(w.begin(), w.end());
    for (auto& wi : w) wi = std::min(wi, w_cap);
    const AffineFit fit = weighted_affine_fit(x, y, w);
    SlopeEstimate est;
    est.a2_hat = fit.slope;
    est.intercept = fit.intercept;
    est.checkpoints_used = static_cast<int>(used.size());
    return est;
}

}  // namespace

PiEnsemble sample_pi(const EnvModel& model, std::size_t n, RngStream& rng) {
    if (n < 100) throw ConfigError("sample_pi: need at least 100 samples");
    PiEnsemble out;
    out.samples.reserve(n);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        PiSample s;
        s.sigma = sample_env(model, rng);
        s.v = sample_wiener_shape(model.grid(), rng);
        s.weight = std::exp(-2.0 * eval_V(model, s.sigma, s.v));
        sum += s.weight;
        sum_sq += s.weight * s.weight;
        out.samples.push_back(std::move(s));
    }
    const double nd = static_cast<double>(n);
    out.z_hat = sum / nd;
    const double var = std::max(0.0, sum_sq / nd - out.z_hat * out.z_hat);
    out.z_se = std::sqrt(var / nd);
    return out;
}

SlopeEstimate estimate_a2_slope(const EnsembleStats& stats, double burn_in_fraction) {
    if (burn_in_fraction < 0.0 || burn_in_fraction >= 1.0) {
        throw ConfigError("estimate_a2_slope: burn-in fraction must be in [0, 1)");
    }
    if (stats.checkpoints.empty()) throw ConfigError("estimate_a2_slope: empty stats");

    std::vector<double> times;
    times.reserve(stats.checkpoints.size());
    for (const auto& c : stats.checkpoints) times.push_back(c.t);
    const double T = times.back();

    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] > 0.0 && times[i] >= burn_in_fraction * T - 1e-12) used.push_back(i);
    }
    if (used.size() < 3) {
        throw ConfigError("estimate_a2_slope: need at least 3 checkpoints after burn-in");
    }

    const auto m2_env = second_moment_by_env(stats);
    std::vector<int> all_envs(stats.n_env);
    for (int e = 0; e < stats.n_env; ++e) all_envs[e] = e;

    SlopeEstimate est = fit_slope(times, m2_env, used, all_envs);

    // Replica bootstrap over environments.
    const int n_resamples = 200;
    RngStream boot(derive_key(stats.master_seed, StreamTag::Analysis, 0xb005u));
    std::vector<double> slopes;
    slopes.reserve(n_resamples);
    std::vector<int> resampled(stats.n_env);
    for (int b = 0; b < n_resamples; ++b) {
        for (int e = 0; e < stats.n_env; ++e) {
            resampled[e] = static_cast<int>(boot.next_u64() % stats.n_env);
        }
        slopes.push_back(fit_slope(times, m2_env, used, resampled).a2_hat);
    }
    est.se = std::sqrt(sample_variance(slopes));
    return est;
}

LowerBound lower_bound_C(const EnvModel& model, const PiEnsemble& pi) {
    LowerBound lb;
    const double envelope = std::exp(-2.0 * model.sup_v());
    lb.c = envelope / pi.z_hat;
    lb.se = envelope * pi.z_se / (pi.z_hat * pi.z_hat);
    return lb;
}

VariationalResult variational_bound(const EnvModel& model, const TrialFamily& trial,
                                    const PiEnsemble& pi) {
    if (model.has_drift()) {
        throw ConfigError("variational_bound: requires a gradient-type model (B = 0)");
    }
    if (model.kind() == EnvKind::QuasiPeriodic) {
        throw ConfigError("variational_bound: trial family is defined for periodic models");
    }
    if (trial.n_modes < 0) throw ConfigError("variational_bound: negative trial family size");
    if (pi.samples.empty()) throw ConfigError("variational_bound: empty pi sample");

    VariationalResult result;
    const int dim = 2 * trial.n_modes;
    if (dim == 0) {
        result.bound = 1.0;  // E_pi ||1||_H^2 with no trial directions
        return result;
    }

    const Grid& grid = model.grid();
    const std::size_t n = grid.n_cells();
    const double dx = grid.dx();

    // Block sums for the bootstrap; the point estimate uses all blocks.
    const std::size_t n_blocks = std::min<std::size_t>(100, pi.samples.size());
    using Mat = Eigen::MatrixXd;
    using Vec = Eigen::VectorXd;
    std::vector<Mat> block_a(n_blocks, Mat::Zero(dim, dim));
    std::vector<Vec> block_b(n_blocks, Vec::Zero(dim));
    std::vector<double> block_w(n_blocks, 0.0);

    std::vector<double> sin_m(n), cos_m(n);
    Mat grads(dim, static_cast<Eigen::Index>(n));

    for (std::size_t s = 0; s < pi.samples.size(); ++s) {
        const auto& smp = pi.samples[s];
        const double phase = smp.sigma.phases[0];
        for (int m = 1; m <= trial.n_modes; ++m) {
            const double rate = kTwoPi * m;
            for (std::size_t i = 0; i < n; ++i) {
                const double arg = rate * (smp.v[i] + phase);
                sin_m[i] = std::sin(arg);
                cos_m[i] = std::cos(arg);
            }
            const int p_cos = 2 * (m - 1);
            const int p_sin = p_cos + 1;
            for (std::size_t i = 0; i < n; ++i) {
                grads(p_cos, static_cast<Eigen::Index>(i)) = -rate * sin_m[i];
                grads(p_sin, static_cast<Eigen::Index>(i)) = rate * cos_m[i];
            }
        }
        const std::size_t blk = s % n_blocks;
        block_w[blk] += smp.weight;
        for (int p = 0; p < dim; ++p) {
            double dot_one = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot_one += grads(p, static_cast<Eigen::Index>(i));
            block_b[blk](p) += smp.weight * dx * dot_one;
            for (int q = p; q < dim; ++q) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    dot += grads(p, static_cast<Eigen::Index>(i)) *
                           grads(q, static_cast<Eigen::Index>(i));
                }
                block_a[blk](p, q) += smp.weight * dx * dot;
            }
        }
    }

    auto solve_bound = [&](const std::vector<std::size_t>& blocks, std::vector<double>* theta_out,
                           bool* ill_out) {
        Mat a = Mat::Zero(dim, dim);
        Vec b = Vec::Zero(dim);
        double w_total = 0.0;
        for (std::size_t blk : blocks) {
            a += block_a[blk];
            b += block_b[blk];
            w_total += block_w[blk];
        }
        a /= w_total;
        b /= w_total;
        for (int p = 0; p < dim; ++p) {
            for (int q = 0; q < p; ++q) a(p, q) = a(q, p);
        }
        Eigen::SelfAdjointEigenSolver<Mat> eig(a);
        const double lambda_max = eig.eigenvalues().maxCoeff();
        const double cutoff = lambda_max * 1e-12;
        bool ill = false;
        Vec theta = Vec::Zero(dim);
        // Smallest-norm solution of A theta = -b on the retained spectrum.
        for (int k = 0; k < dim; ++k) {
            const double lambda = eig.eigenvalues()(k);
            if (lambda <= cutoff) {
                ill = true;
                continue;
            }
            const double coef = eig.eigenvectors().col(k).dot(-b) / lambda;
            theta += coef * eig.eigenvectors().col(k);
        }
        if (ill_out) *ill_out = ill;
        if (theta_out) theta_out->assign(theta.data(), theta.data() + dim);
        // Minimized value: E_pi ||1||^2 + b' theta with A theta = -b.
        return std::max(0.0, 1.0 + b.dot(theta));
    };

    std::vector<std::size_t> all_blocks(n_blocks);
    for (std::size_t i = 0; i < n_blocks; ++i) all_blocks[i] = i;
    result.bound = solve_bound(all_blocks, &result.theta, &result.ill_conditioned);

    // Block bootstrap for the bound's sampling error.
    const int n_resamples = 200;
    RngStream boot(derive_key(0x5eedULL, StreamTag::Analysis, pi.samples.size(), dim));
    std::vector<double> bounds;
    bounds.reserve(n_resamples);
    std::vector<std::size_t> resampled(n_blocks);
    for (int r = 0; r < n_resamples; ++r) {
        for (auto& blk : resampled) blk = boot.next_u64() % n_blocks;
        bounds.push_back(solve_bound(resampled, nullptr, nullptr));
    }
    result.se = std::sqrt(sample_variance(bounds));
    return result;
}

EnhancementResult enhancement_check(const EnvModel& model_gradient, const EnvModel& model_with_b,
                                    const EnsembleConfig& config,
                                    const EnsembleStats* gradient_stats) {
    const auto& pa = model_gradient.potential();
    const auto& pb = model_with_b.potential();
    if (pa.frequencies != pb.frequencies || pa.coord_modes.size() != pb.coord_modes.size()) {
        throw ConfigError("enhancement_check: models must share the same potential");
    }
    for (std::size_t c = 0; c < pa.coord_modes.size(); ++c) {
        if (pa.coord_modes[c].size() != pb.coord_modes[c].size()) {
            throw ConfigError("enhancement_check: models must share the same potential");
        }
        for (std::size_t m = 0; m < pa.coord_modes[c].size(); ++m) {
            const auto& ma = pa.coord_modes[c][m];
            const auto& mb = pb.coord_modes[c][m];
            if (ma.m != mb.m || ma.amplitude != mb.amplitude || ma.phase != mb.phase ||
                ma.profile != mb.profile || ma.profile_j != mb.profile_j) {
                throw ConfigError("enhancement_check: models must share the same potential");
            }
        }
    }
    if (model_gradient.has_drift()) {
        throw ConfigError("enhancement_check: gradient model must have B = 0");
    }
    if (!model_with_b.has_drift()) {
        throw ConfigError("enhancement_check: drift model must have a nonzero B");
    }

    // Police the divergence-free identity before trusting the comparison.
    RngStream vrng(derive_key(config.master_seed, StreamTag::Validation, 0xd17));
    const EnvPoint sigma = sample_env(model_with_b, vrng);
    const auto battery = default_exp_battery(model_with_b.grid(), 10);
    const auto estimates =
        verify_divergence_free(model_with_b, sigma, battery, 100000, vrng);
    for (const auto& est : estimates) {
        if (std::abs(est.estimate) > 3.0 * est.standard_error) {
            throw ConfigError("enhancement_check: drift fails the divergence-free validator (" +
                              est.label + ": estimate " + std::to_string(est.estimate) +
                              ", SE " + std::to_string(est.standard_error) + ")");
        }
    }

    EnsembleStats stats_gradient;
    if (!gradient_stats) {
        stats_gradient = run_ensemble(config, model_gradient);
        gradient_stats = &stats_gradient;
    }
    const EnsembleStats stats_b = run_ensemble(config, model_with_b);

    const double burn_in = 0.2;
    const SlopeEstimate grad = estimate_a2_slope(*gradient_stats, burn_in);
    const SlopeEstimate with_b = estimate_a2_slope(stats_b, burn_in);

    EnhancementResult result;
    result.a2_gradient = grad.a2_hat;
    result.se_gradient = grad.se;
    result.a2_with_b = with_b.a2_hat;
    result.se_with_b = with_b.se;
    result.margin = with_b.a2_hat - grad.a2_hat;
    result.combined_se = std::sqrt(grad.se * grad.se + with_b.se * with_b.se);
    return result;
}

std::vector<PoincareRow> poincare_check(const Grid& grid, const std::vector<CylinderFn>& battery,
                                        std::size_t n_samples, RngStream& rng) {
    std::vector<PoincareRow> rows(battery.size());
    for (std::size_t f = 0; f < battery.size(); ++f) {
        rows[f].label = battery[f].label;
        if (battery[f].kind != CylinderFn::Kind::Constant) {
            grid.require_conforming(battery[f].h, "poincare_check");
        }
    }

    std::vector<double> sum_f(battery.size(), 0.0), sum_f2(battery.size(), 0.0),
        sum_f3(battery.size(), 0.0), sum_f4(battery.size(), 0.0), sum_g(battery.size(), 0.0),
        sum_g2(battery.size(), 0.0);

    for (std::size_t s = 0; s < n_samples; ++s) {
        const Field v = sample_wiener_shape(grid, rng);
        for (std::size_t f = 0; f < battery.size(); ++f) {
            const auto& fn = battery[f];
            double value = 0.0, grad_sq = 0.0;
            if (fn.kind == CylinderFn::Kind::Constant) {
                value = fn.constant;
            } else {
                const double inner = inner_h(grid, v, fn.h);
                const double h_sq = inner_h(grid, fn.h, fn.h);
                switch (fn.kind) {
                    case CylinderFn::Kind::Linear:
                        value = inner;
                        grad_sq = h_sq;
                        break;
                    case CylinderFn::Kind::CosInner:
                        value = std::cos(inner);
                        grad_sq = std::sin(inner) * std::sin(inner) * h_sq;
                        break;
                    case CylinderFn::Kind::SinInner:
                        value = std::sin(inner);
                        grad_sq = std::cos(inner) * std::cos(inner) * h_sq;
                        break;
                    case CylinderFn::Kind::ExpNegSq: {
                        value = std::exp(-inner * inner);
                        const double d = -2.0 * inner * value;
                        grad_sq = d * d * h_sq;
                        break;
                    }
                    case CylinderFn::Kind::Constant:
                        break;
                }
            }
            sum_f[f] += value;
            sum_f2[f] += value * value;
            sum_f3[f] += value * value * value;
            sum_f4[f] += value * value * value * value;
            sum_g[f] += grad_sq;
            sum_g2[f] += grad_sq * grad_sq;
        }
    }

    const double nd = static_cast<double>(n_samples);
    for (std::size_t f = 0; f < battery.size(); ++f) {
        const double m1 = sum_f[f] / nd;
        const double m2 = sum_f2[f] / nd;
        const double m3 = sum_f3[f] / nd;
        const double m4 = sum_f4[f] / nd;
        const double var = std::max(0.0, m2 - m1 * m1);
        // Central fourth moment for the variance estimator's standard error.
        const double c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
        rows[f].variance = var;
        rows[f].variance_se = std::sqrt(std::max(0.0, c4 - var * var) / nd);
        const double ge = sum_g[f] / nd;
        const double ge_var = std::max(0.0, sum_g2[f] / nd - ge * ge);
        rows[f].gradient_energy = ge;
        rows[f].gradient_energy_se = std::sqrt(ge_var / nd);
        const double combined =
            std::sqrt(rows[f].variance_se * rows[f].variance_se +
                      rows[f].gradient_energy_se * rows[f].gradient_energy_se);
        rows[f].pass = rows[f].variance <= rows[f].gradient_energy + 3.0 * combined;
    }
    return rows;
}

}  // namespace rse
