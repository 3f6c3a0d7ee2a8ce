#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace rse {

/// Nodes and weights for integrals against exp(-x^2) on the real line.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch construction of the n-point Gauss-Hermite rule.
GaussHermiteRule gauss_hermite(std::size_t n);

/// E[f(X)] for X ~ N(mean, var), evaluated with an n-point Hermite rule.
double gaussian_expectation(const std::function<double(double)>& f, double mean, double var,
                            std::size_t n = 64);

/// Integral of a smooth 1-periodic function over one period. The trapezoid
/// rule converges spectrally here, so a modest point count is exact to
/// machine precision for band-limited integrands.
double periodic_integral(const std::function<double(double)>& f, std::size_t n_points = 512);

}  // namespace rse
