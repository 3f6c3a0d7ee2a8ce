#include "rse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rse/errors.hpp"
#include "rse/rng.hpp"

namespace rse {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw StatisticsError("mean: empty sample");
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw StatisticsError("sample_variance: need at least 2 samples");
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size() - 1);
}

double standard_error(const std::vector<double>& xs) {
    return std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
}

double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw StatisticsError("quantile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[lo + 1] * frac;
}

double normal_cdf(double x, double mean, double sd) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw StatisticsError("ks_distance: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
    }
    return d;
}

double ks_null_quantile(std::size_t n_samples, double p, std::size_t n_sims, std::uint64_t seed) {
    if (n_samples == 0 || n_sims == 0) throw StatisticsError("ks_null_quantile: empty simulation");
    RngStream rng(seed);
    std::vector<double> stats(n_sims);
    std::vector<double> u(n_samples);
    for (std::size_t s = 0; s < n_sims; ++s) {
        for (auto& x : u) x = rng.uniform01();
        stats[s] = ks_distance(u, [](double x) { return x; });
    }
    return quantile(std::move(stats), p);
}

AffineFit weighted_affine_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w) {
    if (x.size() != y.size() || x.size() != w.size() || x.size() < 2) {
        throw StatisticsError("weighted_affine_fit: need matched inputs with >= 2 points");
    }
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        swx += w[i] * x[i];
        swy += w[i] * y[i];
        swxx += w[i] * x[i] * x[i];
        swxy += w[i] * x[i] * y[i];
    }
    const double det = sw * swxx - swx * swx;
    if (det == 0.0 || !std::isfinite(det)) {
        throw StatisticsError("weighted_affine_fit: degenerate design");
    }
    AffineFit fit;
    fit.slope = (sw * swxy - swx * swy) / det;
    fit.intercept = (swxx * swy - swx * swxy) / det;
    return fit;
}

}  // namespace rse
