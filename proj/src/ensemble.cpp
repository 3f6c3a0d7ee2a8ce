#include "rse/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <thread>

#include "rse/quadrature.hpp"
#include "rse/stats.hpp"

namespace rse {

namespace {

struct ReplicaError {
    int env = 0;
    int noise = 0;
    std::string message;
};

std::vector<double> per_env_means(const std::vector<double>& values, int n_env, int n_noise) {
    std::vector<double> means(n_env, 0.0);
    for (int e = 0; e < n_env; ++e) {
        double acc = 0.0;
        for (int w = 0; w < n_noise; ++w) {
            acc += values[static_cast<std::size_t>(e) * n_noise + w];
        }
        means[e] = acc / n_noise;
    }
    return means;
}

}  // namespace

void aggregate_checkpoint(CheckpointStats& ckpt, int n_env, int n_noise) {
    const std::size_t n_total = ckpt.samples.size();

    std::vector<double> mean_modes(n_total), mean_sq(n_total), fluct(n_total);
    for (std::size_t i = 0; i < n_total; ++i) {
        mean_modes[i] = ckpt.samples[i].mean_mode;
        mean_sq[i] = mean_modes[i] * mean_modes[i];
        fluct[i] = ckpt.samples[i].fluct_normsq;
    }

    ckpt.var_mean_mode = n_total >= 2 ? sample_variance(mean_modes) : 0.0;
    const std::vector<double> m2_env = per_env_means(mean_sq, n_env, n_noise);
    ckpt.var_mean_mode_se = n_env >= 2 ? standard_error(m2_env) : 0.0;

    for (std::size_t p = 0; p < 3; ++p) {
        std::vector<double> devs(n_total);
        for (std::size_t i = 0; i < n_total; ++i) devs[i] = ckpt.samples[i].probe_dev[p];
        ckpt.fluct_var_cell[p] = n_total >= 2 ? sample_variance(devs) : 0.0;
    }

    const std::vector<double> fluct_env = per_env_means(fluct, n_env, n_noise);
    ckpt.mean_fluct_normsq = mean(fluct_env);
    ckpt.mean_fluct_normsq_se = n_env >= 2 ? standard_error(fluct_env) : 0.0;
}

EnsembleStats run_ensemble(const EnsembleConfig& config, const EnvModel& model) {
    if (config.n_env < 2 || config.n_noise < 2) {
        throw ConfigError("run_ensemble: need n_env >= 2 and n_noise >= 2 (variances undefined)");
    }
    if (config.checkpoints.empty()) throw ConfigError("run_ensemble: no checkpoints");
    for (std::size_t i = 1; i < config.checkpoints.size(); ++i) {
        if (config.checkpoints[i] <= config.checkpoints[i - 1]) {
            throw ConfigError("run_ensemble: checkpoints must increase");
        }
    }

    const Grid& grid = model.grid();
    const double T = config.checkpoints.back();
    const std::size_t n_checkpoints = config.checkpoints.size();
    const int n_env = config.n_env;
    const int n_noise = config.n_noise;
    const std::size_t n_tasks = static_cast<std::size_t>(n_env) * n_noise;

    EnsembleStats stats;
    stats.n_env = n_env;
    stats.n_noise = n_noise;
    stats.master_seed = config.master_seed;
    for (std::size_t p = 0; p < 3; ++p) {
        stats.probe_cells[p] = grid.nearest_cell(config.probe_positions[p]);
    }
    stats.checkpoints.resize(n_checkpoints);
    for (std::size_t c = 0; c < n_checkpoints; ++c) {
        stats.checkpoints[c].t = config.checkpoints[c];
        stats.checkpoints[c].samples.resize(n_tasks);
    }

    const Field v0(grid.n_cells(), config.initial_constant);

    std::atomic<std::size_t> next_task{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::optional<ReplicaError> first_error;

    auto worker = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t task = next_task.fetch_add(1, std::memory_order_relaxed);
            if (task >= n_tasks) return;
            const int e = static_cast<int>(task / n_noise);
            const int w = static_cast<int>(task % n_noise);

            RngStream env_rng(derive_key(config.master_seed, StreamTag::Environment,
                                         static_cast<std::uint64_t>(e)));
            const EnvPoint sigma = sample_env(model, env_rng);
            RngStream noise_rng(derive_key(config.master_seed, StreamTag::Noise,
                                           static_cast<std::uint64_t>(e),
                                           static_cast<std::uint64_t>(w)));
            try {
                const Trajectory traj =
                    simulate_trajectory(grid, model, sigma, v0, T, config.dt, config.checkpoints,
                                        noise_rng, config.scheme, /*record_fields=*/true);
                for (std::size_t c = 0; c < traj.checkpoints.size(); ++c) {
                    const auto& rec = traj.checkpoints[c];
                    ReplicaSample& slot = stats.checkpoints[c].samples[task];
                    slot.mean_mode = rec.mean_mode;
                    slot.fluct_normsq = rec.fluct_normsq;
                    for (std::size_t p = 0; p < 3; ++p) {
                        slot.probe_dev[p] = rec.field[stats.probe_cells[p]] - rec.mean_mode;
                    }
                }
            } catch (const std::exception& ex) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = ReplicaError{e, w, ex.what()};
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const std::size_t n_workers =
        std::min<std::size_t>(config.workers > 0 ? static_cast<unsigned>(config.workers) : hw,
                              n_tasks);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (first_error) {
        throw BlowUpError("replica (env " + std::to_string(first_error->env) + ", noise " +
                              std::to_string(first_error->noise) + "): " + first_error->message,
                          0.0, 0);
    }

    for (auto& ckpt : stats.checkpoints) aggregate_checkpoint(ckpt, n_env, n_noise);
    return stats;
}

BoundedFunctional BoundedFunctional::by_name(const std::string& name) {
    if (name == "cos_mean") return {Kind::CosMean, name};
    if (name == "exp_mean_sq") return {Kind::ExpMeanSq, name};
    if (name == "min_norm") return {Kind::MinNorm, name};
    if (name == "inv_fluct") return {Kind::InvFluct, name};
    if (name == "const_one") return {Kind::ConstOne, name};
    throw ConfigError("unknown f-battery member: " + name);
}

std::vector<BoundedFunctional> BoundedFunctional::default_battery() {
    return {by_name("cos_mean"), by_name("exp_mean_sq"), by_name("min_norm"),
            by_name("inv_fluct")};
}

double BoundedFunctional::eval(double mean, double fluct_sq) const {
    switch (kind_) {
        case Kind::CosMean:
            return std::cos(mean);
        case Kind::ExpMeanSq:
            return std::exp(-mean * mean);
        case Kind::MinNorm:
            return std::min(std::sqrt(mean * mean + fluct_sq), 1.0);
        case Kind::InvFluct:
            return 1.0 / (1.0 + fluct_sq);
        case Kind::ConstOne:
            return 1.0;
    }
    return 0.0;
}

double BoundedFunctional::profile(double y) const { return eval(y, 0.0); }

double BoundedFunctional::reference(double a) const {
    if (kind_ == Kind::ConstOne || kind_ == Kind::InvFluct) return 1.0;
    return gaussian_expectation([this](double y) { return profile(y); }, 0.0, a * a);
}

CltMetricSeries clt_l1_metric(const EnsembleStats& stats,
                              const std::vector<BoundedFunctional>& battery, double a) {
    if (battery.empty()) throw ConfigError("clt_l1_metric: empty functional battery");
    if (a <= 0.0) throw ConfigError("clt_l1_metric: a must be positive");

    CltMetricSeries series;
    for (const auto& f : battery) series.member_names.push_back(f.name());

    std::vector<double> refs;
    refs.reserve(battery.size());
    for (const auto& f : battery) refs.push_back(f.reference(a));

    const double half_normal = std::sqrt(2.0 / std::numbers::pi);

    for (const auto& ckpt : stats.checkpoints) {
        if (ckpt.t <= 0.0) continue;  // w = u/sqrt(t) undefined at t = 0
        const double inv_t = 1.0 / ckpt.t;
        const double inv_sqrt_t = 1.0 / std::sqrt(ckpt.t);
        std::vector<double> metric(battery.size(), 0.0);
        std::vector<double> floor(battery.size(), 0.0);
        for (int e = 0; e < stats.n_env; ++e) {
            for (std::size_t fi = 0; fi < battery.size(); ++fi) {
                double acc = 0.0, acc_sq = 0.0;
                for (int w = 0; w < stats.n_noise; ++w) {
                    const auto& s =
                        ckpt.samples[static_cast<std::size_t>(e) * stats.n_noise + w];
                    const double val =
                        battery[fi].eval(s.mean_mode * inv_sqrt_t, s.fluct_normsq * inv_t);
                    acc += val;
                    acc_sq += val * val;
                }
                const double n = stats.n_noise;
                const double inner = acc / n;
                const double var = std::max(0.0, acc_sq / n - inner * inner);
                metric[fi] += std::abs(inner - refs[fi]);
                floor[fi] += std::sqrt(var / n) * half_normal;
            }
        }
        for (std::size_t fi = 0; fi < battery.size(); ++fi) {
            metric[fi] /= stats.n_env;
            floor[fi] /= stats.n_env;
        }
        series.t.push_back(ckpt.t);
        series.metric.push_back(std::move(metric));
        series.noise_floor.push_back(std::move(floor));
    }
    return series;
}

KsResult ks_gaussianity(const std::vector<double>& samples, double a) {
    if (samples.size() < 200) {
        throw StatisticsError("ks_gaussianity: need at least 200 samples");
    }
    if (a <= 0.0) throw StatisticsError("ks_gaussianity: scale a must be positive");
    const double var = sample_variance(samples);
    if (var <= 0.0) throw StatisticsError("ks_gaussianity: degenerate (constant) samples");

    KsResult result;
    result.n_samples = samples.size();
    result.d_n = ks_distance(samples, [a](double x) { return normal_cdf(x, 0.0, a); });

    // The null distribution depends only on the sample count; cache it.
    static std::mutex cache_mutex;
    static std::map<std::size_t, double> cache;
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = cache.find(samples.size());
        if (it != cache.end()) {
            result.threshold = it->second;
        } else {
            result.threshold = ks_null_quantile(samples.size(), 0.99, 4000,
                                                derive_key(0xC0FFEE, StreamTag::Analysis,
                                                           samples.size()));
            cache.emplace(samples.size(), result.threshold);
        }
    }
    result.pass = result.d_n <= result.threshold;
    return result;
}

ConcentrationSeries concentration_stats(const EnsembleStats& stats) {
    if (stats.checkpoints.size() < 2) {
        throw ConfigError("concentration_stats: need at least 2 checkpoints");
    }
    bool doubling = false;
    for (std::size_t i = 0; i < stats.checkpoints.size(); ++i) {
        for (std::size_t j = i + 1; j < stats.checkpoints.size(); ++j) {
            if (stats.checkpoints[j].t >= 2.0 * stats.checkpoints[i].t &&
                stats.checkpoints[i].t > 0.0) {
                doubling = true;
            }
        }
    }
    if (!doubling) {
        throw ConfigError("concentration_stats: need checkpoints t2 >= 2 t1");
    }

    ConcentrationSeries series;
    for (const auto& ckpt : stats.checkpoints) {
        series.t.push_back(ckpt.t);
        series.sup_cell_fluct_var.push_back(
            *std::max_element(ckpt.fluct_var_cell.begin(), ckpt.fluct_var_cell.end()));
        series.var_mean_mode.push_back(ckpt.var_mean_mode);
    }
    return series;
}

double series_ratio(const std::vector<double>& t, const std::vector<double>& values, double t_lo,
                    double t_hi) {
    if (t.size() != values.size() || t.empty()) {
        throw StatisticsError("series_ratio: malformed series");
    }
    auto nearest = [&](double target) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (std::abs(t[i] - target) < std::abs(t[best] - target)) best = i;
        }
        return best;
    };
    const double lo = values[nearest(t_lo)];
    const double hi = values[nearest(t_hi)];
    if (lo == 0.0) throw StatisticsError("series_ratio: zero denominator");
    return hi / lo;
}

}  // namespace rse
