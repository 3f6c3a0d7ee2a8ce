#include "rse/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rse {

GaussHermiteRule gauss_hermite(std::size_t n) {
    if (n == 0) throw std::invalid_argument("gauss_hermite: n must be positive");
    // Jacobi matrix of the (physicists') Hermite recurrence: alpha_i = 0,
    // beta_i = i/2. Eigenvalues are the nodes; weights are mu_0 * q_0^2.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                   static_cast<Eigen::Index>(n));
    for (std::size_t i = 1; i < n; ++i) {
        const double b = std::sqrt(static_cast<double>(i) / 2.0);
        jacobi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = b;
        jacobi(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(i)) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mu0 = std::sqrt(std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
        const double q0 = solver.eigenvectors()(0, static_cast<Eigen::Index>(i));
        rule.weights[i] = mu0 * q0 * q0;
    }
    return rule;
}

double gaussian_expectation(const std::function<double(double)>& f, double mean, double var,
                            std::size_t n) {
    static thread_local std::size_t cached_n = 0;
    static thread_local GaussHermiteRule cached;
    if (cached_n != n) {
        cached = gauss_hermite(n);
        cached_n = n;
    }
    const double scale = std::sqrt(2.0 * var);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += cached.weights[i] * f(mean + scale * cached.nodes[i]);
    }
    return acc / std::sqrt(std::numbers::pi);
}

double periodic_integral(const std::function<double(double)>& f, std::size_t n_points) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_points; ++i) {
        acc += f(static_cast<double>(i) / static_cast<double>(n_points));
    }
    return acc / static_cast<double>(n_points);
}

}  // namespace rse
