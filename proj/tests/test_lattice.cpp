#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "rse/grid.hpp"
#include "rse/stats.hpp"

using namespace rse;

namespace {

/// Dense reflecting-stencil matrix, the explicit form of the operator.
Eigen::MatrixXd laplacian_matrix(const Grid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.n_cells());
    const double inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double diag = -2.0;
        if (i == 0) diag += 1.0;
        if (i == n - 1) diag += 1.0;
        m(i, i) = diag * inv_dx2;
        if (i > 0) m(i, i - 1) = inv_dx2;
        if (i < n - 1) m(i, i + 1) = inv_dx2;
    }
    return m;
}

Field random_field(const Grid& grid, RngStream& rng, double scale = 1.0) {
    Field f(grid.n_cells());
    for (auto& x : f) x = scale * (2.0 * rng.uniform01() - 1.0);
    return f;
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("grid geometry and spectrum invariants") {
    for (std::size_t n : {1u, 2u, 7u, 64u}) {
        const Grid grid(n);
        CHECK(grid.dx() * static_cast<double>(n) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(grid.eigenvalues()[0] == 0.0);
        for (std::size_t k = 1; k < n; ++k) {
            CHECK(grid.eigenvalues()[k] > grid.eigenvalues()[k - 1]);
            CHECK(grid.eigenvalues()[k] > 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(grid.center(i) > 0.0);
            CHECK(grid.center(i) < 1.0);
        }
    }
}

TEST_CASE("inner_h of constants is one") {
    for (std::size_t n : {1u, 3u, 64u}) {
        const Grid grid(n);
        const Field ones(n, 1.0);
        CHECK(inner_h(grid, ones, ones) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("inner_h against the first cosine mode vanishes") {
    const Grid grid(64);
    const Field ones(64, 1.0);
    Field c1(64);
    for (std::size_t i = 0; i < 64; ++i) c1[i] = std::cos(std::numbers::pi * grid.center(i));
    CHECK(std::abs(inner_h(grid, ones, c1)) <= 1e-14);
}

TEST_CASE("inner_h with disjoint support") {
    const Grid grid(2);
    CHECK(inner_h(grid, {1.0, 0.0}, {0.0, 1.0}) == 0.0);
}

TEST_CASE("inner_h rejects nonconforming fields") {
    const Grid grid(4);
    CHECK_THROWS_AS(inner_h(grid, Field(3, 1.0), Field(4, 1.0)), ConformityError);
}

TEST_CASE("laplacian kills constants and conserves mass") {
    const Grid grid(16);
    const Field c(16, 3.25);
    const Field lc = neumann_laplacian_apply(grid, c);
    for (double x : lc) CHECK(x == 0.0);

    RngStream rng(11);
    const Field f = random_field(grid, rng);
    const Field lf = neumann_laplacian_apply(grid, f);
    double sum = 0.0;
    for (double x : lf) sum += x;
    CHECK(std::abs(sum) <= 1e-9);
}

TEST_CASE("laplacian stencil arithmetic at n = 4") {
    const Grid grid(4);
    const Field lf = neumann_laplacian_apply(grid, {1.0, 0.0, 0.0, 0.0});
    CHECK(lf[0] == doctest::Approx(-16.0));
    CHECK(lf[1] == doctest::Approx(16.0));
    CHECK(lf[2] == 0.0);
    CHECK(lf[3] == 0.0);
}

TEST_CASE("cosine modes are eigenvectors of the explicit matrix") {
    for (std::size_t n : {4u, 16u, 64u}) {
        const Grid grid(n);
        const Eigen::MatrixXd m = laplacian_matrix(grid);
        for (std::size_t k = 0; k < n; ++k) {
            const Field mode = grid.mode(k);
            Eigen::VectorXd v(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = mode[i];
            const Eigen::VectorXd matrix_image = m * v;

            const Field image = neumann_laplacian_apply(grid, mode);
            const double mu = grid.eigenvalues()[k];
            const double scale = std::max(1.0, mu);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::abs(image[i] - matrix_image(static_cast<Eigen::Index>(i))) <=
                      1e-10 * scale);
                CHECK(std::abs(image[i] + mu * mode[i]) <= 1e-10 * scale);
            }
        }
    }
}

TEST_CASE("laplacian is symmetric for inner_h") {
    const Grid grid(32);
    RngStream rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const Field f = random_field(grid, rng);
        const Field g = random_field(grid, rng);
        const double a = inner_h(grid, neumann_laplacian_apply(grid, f), g);
        const double b = inner_h(grid, f, neumann_laplacian_apply(grid, g));
        CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("cosine transform of a constant hits only mode zero") {
    const Grid grid(16);
    const auto coeffs = cosine_forward(grid, Field(16, 2.5));
    CHECK(coeffs[0] == doctest::Approx(2.5).epsilon(1e-13));
    for (std::size_t k = 1; k < 16; ++k) CHECK(std::abs(coeffs[k]) <= 1e-13);
}

TEST_CASE("cosine transform isolates the first mode (Gram oracle)") {
    const std::size_t n = 8;
    const Grid grid(n);
    const Field c1 = grid.mode(1);
    // Direct Gram-matrix check of sampled-cosine orthogonality.
    for (std::size_t k = 0; k < n; ++k) {
        const double gram = inner_h(grid, c1, grid.mode(k));
        if (k == 1) {
            CHECK(gram == doctest::Approx(1.0).epsilon(1e-12));
        } else {
            CHECK(std::abs(gram) <= 1e-12);
        }
    }
    const auto coeffs = cosine_forward(grid, c1);
    CHECK(coeffs[1] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 0; k < n; ++k) {
        if (k != 1) CHECK(std::abs(coeffs[k]) <= 1e-12);
    }
}

TEST_CASE("transform roundtrip is the identity within 1e-12") {
    for (std::size_t n : {1u, 8u, 64u, 1024u}) {  // 1024 exercises the fast path
        const Grid grid(n);
        RngStream rng(n);
        const Field f = random_field(grid, rng, 3.0);
        const Field back = cosine_inverse(grid, cosine_forward(grid, f));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(back[i] - f[i]) <= 1e-12 * std::max(1.0, std::abs(f[i])));
        }
    }
}

TEST_CASE("fast transform path agrees with direct summation") {
    const std::size_t n = 1024;
    const Grid grid(n);
    RngStream rng(99);
    const Field f = random_field(grid, rng);
    const auto coeffs = cosine_forward(grid, f);
    for (std::size_t k : {0u, 1u, 17u, 511u, 1023u}) {
        const double direct = inner_h(grid, f, grid.mode(k));
        CHECK(coeffs[k] == doctest::Approx(direct).epsilon(1e-11));
    }
}

TEST_CASE("wiener sampler: moments against the min(x_i, x_j) covariance") {
    const std::size_t n = 32;
    const Grid grid(n);
    RngStream rng(2024);
    const std::size_t draws = 100000;
    double sum_last = 0.0, sum_last_sq = 0.0, sum_cross = 0.0;
    const std::size_t i = 7, j = 23;
    for (std::size_t s = 0; s < draws; ++s) {
        const Field v = sample_wiener_shape(grid, rng);
        sum_last += v[n - 1];
        sum_last_sq += v[n - 1] * v[n - 1];
        sum_cross += v[i] * v[j];
    }
    const double nd = static_cast<double>(draws);
    const double x_last = grid.center(n - 1);
    CHECK(std::abs(sum_last / nd) <= 3.0 * std::sqrt(x_last / nd));
    CHECK(sum_last_sq / nd == doctest::Approx(x_last).epsilon(0.05));
    CHECK(sum_cross / nd == doctest::Approx(grid.center(i)).epsilon(0.05));
}

TEST_CASE("wiener precision matrix is tridiagonal") {
    for (std::size_t n : {2u, 9u, 16u}) {
        const Grid grid(n);
        Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    std::min(grid.center(i), grid.center(j));
            }
        }
        const Eigen::MatrixXd precision = cov.inverse();
        const double scale = precision.cwiseAbs().maxCoeff();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i > j + 1 || j > i + 1) {
                    CHECK(std::abs(precision(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(j))) <= 1e-8 * scale);
                }
            }
        }
    }
}

TEST_CASE("nearest_cell clamps and rounds") {
    const Grid grid(10);
    CHECK(grid.nearest_cell(0.0) == 0);
    CHECK(grid.nearest_cell(1.0) == 9);
    CHECK(grid.nearest_cell(0.5) == 5);  // 0.5 sits between cells 4 and 5
    CHECK(grid.nearest_cell(0.149) == 1);
}

}  // TEST_SUITE("lattice")
