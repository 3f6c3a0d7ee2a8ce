#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace rse {

double mean(const std::vector<double>& xs);
/// Unbiased sample variance (n-1 denominator).
double sample_variance(const std::vector<double>& xs);
/// Standard error of the sample mean.
double standard_error(const std::vector<double>& xs);

/// Empirical p-quantile by linear interpolation of order statistics.
double quantile(std::vector<double> xs, double p);

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);

/// Kolmogorov-Smirnov distance sup |F_n - F| against a reference CDF.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);

/// p-quantile of the null KS distribution for n samples, obtained by
/// simulation (the null is distribution-free, so uniforms suffice).
double ks_null_quantile(std::size_t n_samples, double p, std::size_t n_sims, std::uint64_t seed);

struct AffineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Weighted least squares for y = intercept + slope * x.
AffineFit weighted_affine_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w);

}  // namespace rse
