#include "rse/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

namespace rse {

namespace {

// FFTW plan creation is not thread-safe; execution of distinct buffers is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

// Out-of-place DCT-II / DCT-III plans created once per grid. Plans are made
// with FFTW_UNALIGNED so they can execute on any caller buffer.
struct Grid::FastTransform {
    fftw_plan forward = nullptr;   // REDFT10
    fftw_plan inverse = nullptr;   // REDFT01
    std::vector<double> in, out;   // dummy buffers used only at planning time

    explicit FastTransform(std::size_t n) : in(n), out(n) {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        const int ni = static_cast<int>(n);
        forward = fftw_plan_r2r_1d(ni, in.data(), out.data(), FFTW_REDFT10,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
        inverse = fftw_plan_r2r_1d(ni, in.data(), out.data(), FFTW_REDFT01,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    }

    ~FastTransform() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (inverse) fftw_destroy_plan(inverse);
    }
};

Grid::Grid(std::size_t n_cells) : n_(n_cells) {
    if (n_ == 0) throw ConfigError("Grid: n_cells must be positive");
    dx_ = 1.0 / static_cast<double>(n_);
    centers_.resize(n_);
    mu_.resize(n_);
    const double pi = std::numbers::pi;
    for (std::size_t i = 0; i < n_; ++i) {
        centers_[i] = (static_cast<double>(i) + 0.5) * dx_;
    }
    const double two_n_sq = 2.0 * static_cast<double>(n_) * static_cast<double>(n_);
    for (std::size_t k = 0; k < n_; ++k) {
        mu_[k] = two_n_sq * (1.0 - std::cos(static_cast<double>(k) * pi / static_cast<double>(n_)));
    }
    mu_[0] = 0.0;

    if (n_ <= kDenseTransformLimit) {
        basis_.resize(n_ * n_);
        const double sqrt2 = std::numbers::sqrt2;
        for (std::size_t k = 0; k < n_; ++k) {
            for (std::size_t i = 0; i < n_; ++i) {
                basis_[k * n_ + i] =
                    (k == 0) ? 1.0 : sqrt2 * std::cos(static_cast<double>(k) * pi * centers_[i]);
            }
        }
    } else {
        fast_ = std::make_unique<FastTransform>(n_);
    }
}

Grid::~Grid() = default;

Field Grid::mode(std::size_t k) const {
    Field m(n_);
    if (!basis_.empty()) {
        std::copy_n(basis_.begin() + static_cast<std::ptrdiff_t>(k * n_), n_, m.begin());
        return m;
    }
    const double pi = std::numbers::pi;
    for (std::size_t i = 0; i < n_; ++i) {
        m[i] = (k == 0) ? 1.0 : std::numbers::sqrt2 * std::cos(static_cast<double>(k) * pi * centers_[i]);
    }
    return m;
}

std::size_t Grid::nearest_cell(double x) const {
    const double raw = x / dx_ - 0.5;
    const auto i = static_cast<long>(std::llround(raw));
    return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n_) - 1));
}

void Grid::require_conforming(const Field& f, const char* what) const {
    if (f.size() != n_) {
        throw ConformityError(std::string(what) + ": field of size " + std::to_string(f.size()) +
                              " does not conform to grid with " + std::to_string(n_) + " cells");
    }
}

double inner_h(const Grid& grid, const Field& f, const Field& g) {
    grid.require_conforming(f, "inner_h");
    grid.require_conforming(g, "inner_h");
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * g[i];
    return grid.dx() * acc;
}

double norm_h(const Grid& grid, const Field& f) {
    return std::sqrt(inner_h(grid, f, f));
}

Field neumann_laplacian_apply(const Grid& grid, const Field& f) {
    grid.require_conforming(f, "neumann_laplacian_apply");
    const std::size_t n = grid.n_cells();
    Field out(n);
    const double inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    for (std::size_t i = 0; i < n; ++i) {
        const double left = (i == 0) ? f[0] : f[i - 1];
        const double right = (i + 1 == n) ? f[n - 1] : f[i + 1];
        out[i] = (left - 2.0 * f[i] + right) * inv_dx2;
    }
    return out;
}

void cosine_forward(const Grid& grid, std::span<const double> f, std::span<double> out) {
    const std::size_t n = grid.n_cells();
    if (f.size() != n || out.size() != n) throw ConformityError("cosine_forward: size mismatch");
    if (!grid.basis_.empty()) {
        const double dx = grid.dx();
        for (std::size_t k = 0; k < n; ++k) {
            const double* row = grid.basis_.data() + k * n;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += row[i] * f[i];
            out[k] = dx * acc;
        }
        return;
    }
    // FFTW REDFT10: Y_k = 2 sum_i f_i cos(pi k (i+1/2) / n).
    // a_0 = dx/2 * Y_0, a_k = dx/sqrt(2) * Y_k.
    fftw_execute_r2r(grid.fast_->forward, const_cast<double*>(f.data()), out.data());
    const double dx = grid.dx();
    out[0] *= 0.5 * dx;
    const double scale = dx / std::numbers::sqrt2;
    for (std::size_t k = 1; k < n; ++k) out[k] *= scale;
}

void cosine_inverse(const Grid& grid, std::span<const double> coeffs, std::span<double> out) {
    const std::size_t n = grid.n_cells();
    if (coeffs.size() != n || out.size() != n) throw ConformityError("cosine_inverse: size mismatch");
    if (!grid.basis_.empty()) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double a = coeffs[k];
            if (a == 0.0) continue;
            const double* row = grid.basis_.data() + k * n;
            for (std::size_t i = 0; i < n; ++i) out[i] += a * row[i];
        }
        return;
    }
    // FFTW REDFT01 with X_0 = a_0, X_k = a_k / sqrt(2) reproduces
    // f_i = a_0 + sum_k sqrt(2) a_k cos(pi k (i+1/2)/n).
    std::vector<double> scaled(coeffs.begin(), coeffs.end());
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    for (std::size_t k = 1; k < n; ++k) scaled[k] *= inv_sqrt2;
    fftw_execute_r2r(grid.fast_->inverse, scaled.data(), out.data());
}

std::vector<double> cosine_forward(const Grid& grid, const Field& f) {
    grid.require_conforming(f, "cosine_forward");
    std::vector<double> out(grid.n_cells());
    cosine_forward(grid, std::span<const double>(f), std::span<double>(out));
    return out;
}

Field cosine_inverse(const Grid& grid, const std::vector<double>& coeffs) {
    if (coeffs.size() != grid.n_cells()) throw ConformityError("cosine_inverse: coefficient count mismatch");
    Field out(grid.n_cells());
    cosine_inverse(grid, std::span<const double>(coeffs), std::span<double>(out));
    return out;
}

Field sample_wiener_shape(const Grid& grid, RngStream& rng) {
    const std::size_t n = grid.n_cells();
    Field v(n);
    const double sd_first = std::sqrt(0.5 * grid.dx());
    const double sd = std::sqrt(grid.dx());
    double acc = sd_first * rng.normal();
    v[0] = acc;
    for (std::size_t i = 1; i < n; ++i) {
        acc += sd * rng.normal();
        v[i] = acc;
    }
    return v;
}

}  // namespace rse
