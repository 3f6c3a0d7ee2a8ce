#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "rse/errors.hpp"
#include "rse/rng.hpp"

namespace rse {

/// Grid function: one value per cell center, in units of the solution u.
using Field = std::vector<double>;

/// Uniform cell-centered discretization of [0,1]: centers x_i = (i+1/2)dx,
/// dx = 1/n. Carries the reflecting (Neumann) Laplacian spectrum
/// mu_k = 2 n^2 (1 - cos(k pi / n)) and its orthonormal cosine eigenbasis
/// with respect to the discrete L^2[0,1] inner product dx * sum f_i g_i.
///
/// Immutable after construction and safe to share across threads.
class Grid {
public:
    explicit Grid(std::size_t n_cells);
    ~Grid();

    Grid(const Grid&) = delete;
    Grid& operator=(const Grid&) = delete;

    std::size_t n_cells() const { return n_; }
    double dx() const { return dx_; }
    const std::vector<double>& centers() const { return centers_; }
    double center(std::size_t i) const { return centers_[i]; }

    /// Eigenvalues of minus the discrete Neumann Laplacian, increasing in k.
    const std::vector<double>& eigenvalues() const { return mu_; }

    /// Orthonormal cosine mode k sampled at cell centers:
    /// e_0 = 1, e_k(x_i) = sqrt(2) cos(k pi x_i) for k >= 1.
    Field mode(std::size_t k) const;

    /// Index of the cell whose center is nearest to x in [0,1].
    std::size_t nearest_cell(double x) const;

    void require_conforming(const Field& f, const char* what) const;

    /// Transforms above this size go through the fast path instead of the
    /// precomputed basis matrix.
    static constexpr std::size_t kDenseTransformLimit = 512;

private:
    friend void cosine_forward(const Grid&, std::span<const double>, std::span<double>);
    friend void cosine_inverse(const Grid&, std::span<const double>, std::span<double>);

    std::size_t n_;
    double dx_;
    std::vector<double> centers_;
    std::vector<double> mu_;
    std::vector<double> basis_;    // basis_[k*n + i] = e_k(x_i); empty on the fast path
    struct FastTransform;
    std::unique_ptr<FastTransform> fast_;
};

/// Discrete L^2[0,1] inner product dx * sum_i f_i g_i.
double inner_h(const Grid& grid, const Field& f, const Field& g);
double norm_h(const Grid& grid, const Field& f);

/// Reflecting second-difference stencil (f_{i-1} - 2 f_i + f_{i+1}) / dx^2
/// with f_{-1} := f_0 and f_n := f_{n-1}. Output sums to zero.
Field neumann_laplacian_apply(const Grid& grid, const Field& f);

/// Coefficients a_k = <f, e_k>_H on the Laplacian eigenbasis.
std::vector<double> cosine_forward(const Grid& grid, const Field& f);
/// Reconstruction f = sum_k a_k e_k. Inverse of cosine_forward.
Field cosine_inverse(const Grid& grid, const std::vector<double>& coeffs);

// In-place variants used by the integrators; in and out must not alias.
void cosine_forward(const Grid& grid, std::span<const double> f, std::span<double> out);
void cosine_inverse(const Grid& grid, std::span<const double> coeffs, std::span<double> out);

/// Discrete pinned Brownian path at cell centers: v_i = sum_{j<=i} eta_j
/// with eta_0 ~ N(0, dx/2), eta_j ~ N(0, dx); Cov(v_i, v_j) = min(x_i, x_j).
Field sample_wiener_shape(const Grid& grid, RngStream& rng);

}  // namespace rse
