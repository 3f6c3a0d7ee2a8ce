#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rse/environment.hpp"
#include "rse/quadrature.hpp"
#include "rse/stats.hpp"

using namespace rse;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::shared_ptr<const Grid> make_grid_ptr(std::size_t n) { return std::make_shared<Grid>(n); }

/// V(x, y) = kappa cos(2 pi m y), x-independent.
EnvModel cos_model(std::shared_ptr<const Grid> grid, double kappa, int m = 1,
                   std::optional<DivFreeSpec> divfree = std::nullopt) {
    PotentialSpec spec;
    spec.frequencies = {1.0};
    spec.coord_modes = {{PotentialMode{m, kappa, 0.0, XProfile::Constant, 0}}};
    return EnvModel::periodic(std::move(grid), spec, std::move(divfree));
}

EnvModel quasi_model(std::shared_ptr<const Grid> grid) {
    PotentialSpec spec;
    spec.frequencies = {1.0, std::numbers::sqrt2};
    spec.coord_modes = {{PotentialMode{1, 0.3, 0.0, XProfile::Constant, 0}},
                        {PotentialMode{1, 0.2, 0.7, XProfile::Cosine, 1}}};
    return EnvModel::quasi_periodic(std::move(grid), spec);
}

Field random_smooth_field(const Grid& grid, RngStream& rng) {
    Field u(grid.n_cells(), 0.0);
    for (int k = 0; k <= 3; ++k) {
        const double amp = (2.0 * rng.uniform01() - 1.0) * 0.4;
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] += amp * std::cos(k * std::numbers::pi * grid.center(i));
        }
    }
    return u;
}

Field random_direction(const Grid& grid, RngStream& rng) {
    Field h(grid.n_cells());
    for (auto& x : h) x = 2.0 * rng.uniform01() - 1.0;
    const double norm = norm_h(grid, h);
    for (auto& x : h) x /= norm;
    return h;
}

DivFreeSpec default_stream() {
    DivFreeSpec spec;
    spec.mode1 = 1;
    spec.mode2 = 2;
    spec.chi.cx = 0.0;
    spec.chi.cy = 0.0;
    spec.chi.radius = 4.0;
    spec.chi.amplitude = 1.0;
    return spec;
}

}  // namespace

TEST_SUITE("environment") {

TEST_CASE("eval_V on constant fields") {
    auto grid = make_grid_ptr(16);
    const EnvModel model = cos_model(grid, 1.0);
    const EnvPoint sigma{{0.0}};
    CHECK(eval_V(model, sigma, Field(16, 0.0)) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(eval_V(model, sigma, Field(16, 0.5)) == doctest::Approx(-1.0).epsilon(1e-13));
}

TEST_CASE("eval_DV on constant fields") {
    auto grid = make_grid_ptr(8);
    const EnvModel model = cos_model(grid, 1.0);
    const EnvPoint sigma{{0.0}};
    const Field at_zero = eval_DV(model, sigma, Field(8, 0.0));
    for (double x : at_zero) CHECK(std::abs(x) <= 1e-13);
    const Field at_quarter = eval_DV(model, sigma, Field(8, 0.25));
    for (double x : at_quarter) CHECK(x == doctest::Approx(-kTwoPi).epsilon(1e-12));
}

TEST_CASE("eval_V matches a refined-quadrature oracle for smooth fields") {
    const std::size_t n = 64;
    auto grid = make_grid_ptr(n);
    const EnvModel model = cos_model(grid, 1.0);
    RngStream rng(5);
    const EnvPoint sigma{{rng.uniform01()}};
    const Field u = random_smooth_field(*grid, rng);

    const double coarse = eval_V(model, sigma, u);

    // 16x finer midpoint rule on the linear interpolant of u.
    const std::size_t refine = 16;
    const std::size_t n_fine = n * refine;
    const double dx_fine = 1.0 / static_cast<double>(n_fine);
    double fine = 0.0;
    for (std::size_t j = 0; j < n_fine; ++j) {
        const double x = (static_cast<double>(j) + 0.5) * dx_fine;
        double value;
        if (x <= grid->center(0)) {
            value = u[0];
        } else if (x >= grid->center(n - 1)) {
            value = u[n - 1];
        } else {
            const std::size_t i =
                static_cast<std::size_t>((x - grid->center(0)) / grid->dx());
            const double frac = (x - grid->center(i)) / grid->dx();
            value = u[i] * (1.0 - frac) + u[i + 1] * frac;
        }
        fine += std::cos(kTwoPi * (value + sigma.phases[0]));
    }
    fine *= dx_fine;

    const double dx2 = grid->dx() * grid->dx();
    CHECK(std::abs(coarse - fine) <= 20.0 * dx2);
}

TEST_CASE("directional finite differences match the H-gradient") {
    auto grid = make_grid_ptr(32);
    const EnvModel model = cos_model(grid, 0.7, 2);
    RngStream rng(17);
    const double eps = 1e-4;
    for (int rep = 0; rep < 20; ++rep) {
        const EnvPoint sigma = sample_env(model, rng);
        const Field u = random_smooth_field(*grid, rng);
        const Field h = random_direction(*grid, rng);
        Field up = u, dn = u;
        for (std::size_t i = 0; i < u.size(); ++i) {
            up[i] += eps * h[i];
            dn[i] -= eps * h[i];
        }
        const double fd = (eval_V(model, sigma, up) - eval_V(model, sigma, dn)) / (2.0 * eps);
        const double exact = inner_h(*grid, eval_DV(model, sigma, u), h);
        CHECK(std::abs(fd - exact) <= 1e-5 * std::max(1.0, std::abs(exact)));
    }
}

TEST_CASE("quasi-periodic gradient consistency") {
    auto grid = make_grid_ptr(16);
    const EnvModel model = quasi_model(grid);
    RngStream rng(23);
    const double eps = 1e-4;
    for (int rep = 0; rep < 10; ++rep) {
        const EnvPoint sigma = sample_env(model, rng);
        const Field u = random_smooth_field(*grid, rng);
        const Field h = random_direction(*grid, rng);
        Field up = u, dn = u;
        for (std::size_t i = 0; i < u.size(); ++i) {
            up[i] += eps * h[i];
            dn[i] -= eps * h[i];
        }
        const double fd = (eval_V(model, sigma, up) - eval_V(model, sigma, dn)) / (2.0 * eps);
        const double exact = inner_h(*grid, eval_DV(model, sigma, u), h);
        CHECK(std::abs(fd - exact) <= 1e-5 * std::max(1.0, std::abs(exact)));
    }
}

TEST_CASE("integer shifts leave the periodic potential invariant") {
    auto grid = make_grid_ptr(16);
    const EnvModel model = cos_model(grid, 0.5);
    RngStream rng(3);
    const EnvPoint sigma = sample_env(model, rng);
    const Field u = random_smooth_field(*grid, rng);
    const double base = eval_V(model, sigma, u);
    for (int m : {-2, 1, 3}) {
        Field shifted = u;
        for (auto& x : shifted) x += m;
        CHECK(std::abs(eval_V(model, sigma, shifted) - base) <= 1e-12);
    }
}

TEST_CASE("sample_env is uniform and independent across coordinates") {
    auto grid = make_grid_ptr(4);
    const EnvModel model = cos_model(grid, 0.5);
    RngStream rng(41);
    const std::size_t draws = 100000;
    std::vector<double> phases(draws);
    for (auto& p : phases) p = sample_env(model, rng).phases[0];
    CHECK(std::abs(mean(phases) - 0.5) <= 0.005);
    CHECK(ks_distance(phases, [](double x) { return x; }) <
          1.63 / std::sqrt(static_cast<double>(draws)));

    const EnvModel quasi = quasi_model(make_grid_ptr(4));
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t s = 0; s < draws; ++s) {
        const EnvPoint sigma = sample_env(quasi, rng);
        const double x = sigma.phases[0], y = sigma.phases[1];
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const double nd = static_cast<double>(draws);
    const double corr = (sxy / nd - sx / nd * sy / nd) /
                        std::sqrt((sxx / nd - sx / nd * sx / nd) * (syy / nd - sy / nd * sy / nd));
    CHECK(std::abs(corr) < 0.01);
}

TEST_CASE("eval_B is zero without a drift or with a zero stream") {
    auto grid = make_grid_ptr(16);
    const EnvModel no_drift = cos_model(grid, 0.5);
    RngStream rng(4);
    const EnvPoint sigma = sample_env(no_drift, rng);
    const Field u = random_smooth_field(*grid, rng);
    for (double x : eval_B(no_drift, sigma, u)) CHECK(x == 0.0);

    DivFreeSpec zero_stream = default_stream();
    zero_stream.chi.amplitude = 0.0;
    const EnvModel zero_chi = cos_model(make_grid_ptr(16), 0.5, 1, zero_stream);
    for (double x : eval_B(zero_chi, sigma, u)) CHECK(x == 0.0);
}

TEST_CASE("stream fields are orthonormal with zero first cell") {
    auto grid = make_grid_ptr(32);
    const EnvModel model = cos_model(grid, 0.5, 1, default_stream());
    const Field& k1 = model.stream_field(0);
    const Field& k2 = model.stream_field(1);
    CHECK(k1[0] == 0.0);
    CHECK(k2[0] == 0.0);
    CHECK(std::abs(inner_h(*grid, k1, k2)) <= 1e-10);
    CHECK(inner_h(*grid, k1, k1) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(inner_h(*grid, k2, k2) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("constructed drift passes the divergence-free battery") {
    auto grid = make_grid_ptr(16);
    const EnvModel model = cos_model(grid, 0.5, 1, default_stream());
    RngStream rng(2718);
    const EnvPoint sigma = sample_env(model, rng);
    const auto battery = default_exp_battery(*grid, 10);
    const auto estimates = verify_divergence_free(model, sigma, battery, 100000, rng);
    CHECK(estimates.size() == 10);
    for (const auto& est : estimates) {
        INFO(est.label, " estimate ", est.estimate, " se ", est.standard_error);
        CHECK(std::abs(est.estimate) <= 3.0 * est.standard_error);
    }
}

TEST_CASE("divergence-free property holds across generated stream specs") {
    RngStream rng(660);
    int spec_index = 0;
    for (const auto& [m1, m2, cx, cy, r, amp] :
         {std::tuple{3, 5, 0.5, -0.25, 2.0, 0.7}, std::tuple{1, 4, 0.0, 0.0, 6.0, -1.3},
          std::tuple{2, 7, -1.0, 0.5, 3.0, 2.0}}) {
        DivFreeSpec spec;
        spec.mode1 = m1;
        spec.mode2 = m2;
        spec.chi.cx = cx;
        spec.chi.cy = cy;
        spec.chi.radius = r;
        spec.chi.amplitude = amp;
        const EnvModel model = cos_model(make_grid_ptr(16), 0.4, 1, spec);
        const EnvPoint sigma = sample_env(model, rng);
        const auto estimates =
            verify_divergence_free(model, sigma, default_exp_battery(model.grid(), 10), 50000,
                                   rng);
        for (const auto& est : estimates) {
            INFO("spec ", spec_index, " ", est.label, " est ", est.estimate, " se ",
                 est.standard_error);
            CHECK(std::abs(est.estimate) <= 3.0 * est.standard_error);
        }
        ++spec_index;
    }
}

TEST_CASE("zero drift gives exactly zero divergence estimates") {
    auto grid = make_grid_ptr(8);
    const EnvModel model = cos_model(grid, 0.5);
    RngStream rng(1);
    const EnvPoint sigma = sample_env(model, rng);
    const auto estimates =
        verify_divergence_free(model, sigma, default_exp_battery(*grid, 4), 200, rng);
    for (const auto& est : estimates) {
        CHECK(est.estimate == 0.0);
        CHECK(est.standard_error == 0.0);
    }
}

TEST_CASE("verify_divergence_free rejects tiny sample counts") {
    auto grid = make_grid_ptr(8);
    const EnvModel model = cos_model(grid, 0.5);
    RngStream rng(1);
    const EnvPoint sigma = sample_env(model, rng);
    CHECK_THROWS_AS(
        verify_divergence_free(model, sigma, default_exp_battery(*grid, 4), 50, rng),
        ConfigError);
}

TEST_CASE("gradient imposter is caught, and matches a quadrature oracle") {
    // Two cells keep the Gaussian integral a 2-d quadrature.
    const std::size_t n = 2;
    auto grid = make_grid_ptr(n);
    DivFreeSpec imposter;
    imposter.kind = DriftKind::GradientImposter;
    const EnvModel model = cos_model(grid, 0.5, 1, imposter);
    const EnvPoint sigma{{0.0}};
    const auto battery = default_exp_battery(*grid, 4);

    // Oracle: E[e^{-2V} <Df, DV>] over v0 = eta0, v1 = eta0 + eta1 with
    // eta0 ~ N(0, dx/2), eta1 ~ N(0, dx), tensorized Gauss-Hermite.
    const GaussHermiteRule rule = gauss_hermite(48);
    const double sd0 = std::sqrt(0.5 * grid->dx());
    const double sd1 = std::sqrt(grid->dx());
    std::vector<double> oracle(battery.size(), 0.0);
    double weight_total = 0.0;
    for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
        for (std::size_t b = 0; b < rule.nodes.size(); ++b) {
            const double eta0 = std::sqrt(2.0) * sd0 * rule.nodes[a];
            const double eta1 = std::sqrt(2.0) * sd1 * rule.nodes[b];
            const Field v = {eta0, eta0 + eta1};
            const double w = rule.weights[a] * rule.weights[b];
            weight_total += w;
            const double gibbs = std::exp(-2.0 * eval_V(model, sigma, v));
            const Field dv = eval_DV(model, sigma, v);
            for (std::size_t t = 0; t < battery.size(); ++t) {
                const double vh = inner_h(*grid, v, battery[t].h);
                const double hdv = inner_h(*grid, battery[t].h, dv);
                const double trig = battery[t].imaginary ? std::cos(vh) : -std::sin(vh);
                oracle[t] += w * gibbs * trig * hdv;
            }
        }
    }
    for (auto& x : oracle) x /= weight_total;

    double largest = 0.0;
    for (double x : oracle) largest = std::max(largest, std::abs(x));
    CHECK(largest > 1e-3);  // the imposter integral really is nonzero

    RngStream rng(31415);
    const auto estimates = verify_divergence_free(model, sigma, battery, 1000000, rng);
    bool any_rejected = false;
    for (std::size_t t = 0; t < estimates.size(); ++t) {
        INFO(estimates[t].label, " mc ", estimates[t].estimate, " oracle ", oracle[t]);
        CHECK(std::abs(estimates[t].estimate - oracle[t]) <= 4.0 * estimates[t].standard_error);
        if (std::abs(estimates[t].estimate) > 5.0 * estimates[t].standard_error) {
            any_rejected = true;
        }
    }
    CHECK(any_rejected);
}

TEST_CASE("shift covariance is exact for every model kind") {
    RngStream rng(97);
    auto check_model = [&](const EnvModel& model) {
        const EnvPoint zero_sigma{std::vector<double>(model.dimension(), 0.0)};
        const Field u0 = random_smooth_field(model.grid(), rng);
        CHECK(verify_shift_covariance(model, zero_sigma, u0, 0.0) == 0.0);
        for (int rep = 0; rep < 100; ++rep) {
            const EnvPoint sigma = sample_env(model, rng);
            const Field u = random_smooth_field(model.grid(), rng);
            const double c = 6.0 * rng.uniform01() - 3.0;
            CHECK(verify_shift_covariance(model, sigma, u, c) <= 1e-10);
        }
    };
    check_model(cos_model(make_grid_ptr(16), 0.5, 1, default_stream()));
    check_model(quasi_model(make_grid_ptr(16)));
    check_model(EnvModel::zero(make_grid_ptr(16)));
}

TEST_CASE("full-period shift is invisible to the periodic model") {
    auto grid = make_grid_ptr(16);
    const EnvModel model = cos_model(grid, 0.5);
    RngStream rng(8);
    const EnvPoint sigma = sample_env(model, rng);
    const Field u = random_smooth_field(*grid, rng);
    CHECK(verify_shift_covariance(model, sigma, u, 1.0) <= 1e-12);
}

TEST_CASE("assumption report for the zero model") {
    const EnvModel model = EnvModel::zero(make_grid_ptr(8));
    RngStream rng(12);
    const AssumptionReport report = assumption_report(model, 200, rng);
    CHECK(report.sampled_sup_v == 0.0);
    CHECK(report.sampled_sup_dv == 0.0);
    CHECK(report.sampled_sup_b == 0.0);
    CHECK(report.declared_sup_v == 0.0);
    CHECK(report.ok);
}

TEST_CASE("assumption report respects the analytic envelopes") {
    const double kappa = 0.8;
    const EnvModel model = cos_model(make_grid_ptr(32), kappa);
    CHECK(model.sup_v() == doctest::Approx(kappa));
    CHECK(model.sup_dv() == doctest::Approx(kTwoPi * kappa));
    CHECK(model.lipschitz_dv() == doctest::Approx(kTwoPi * kTwoPi * kappa));

    RngStream rng(55);
    const AssumptionReport report = assumption_report(model, 2000, rng);
    CHECK(report.ok);
    CHECK(report.sampled_sup_v <= kappa + 1e-12);
    CHECK(report.sampled_sup_dv <= kTwoPi * kappa + 1e-12);
    CHECK(report.sampled_lipschitz_dv <= kTwoPi * kTwoPi * kappa + 1e-9);
}

TEST_CASE("drift magnitude stays inside the declared envelope") {
    const EnvModel model = cos_model(make_grid_ptr(16), 0.5, 1, default_stream());
    RngStream rng(77);
    const AssumptionReport report = assumption_report(model, 2000, rng);
    CHECK(report.ok);
    CHECK(report.sampled_sup_b <= report.declared_sup_b + 1e-12);
    CHECK(report.declared_sup_b > 0.0);
}

TEST_CASE("evaluators reject nonconforming input") {
    const EnvModel model = cos_model(make_grid_ptr(8), 0.5);
    const EnvPoint sigma{{0.0}};
    CHECK_THROWS_AS(eval_V(model, sigma, Field(7, 0.0)), ConformityError);
    CHECK_THROWS_AS(eval_DV(model, sigma, Field(9, 0.0)), ConformityError);
    CHECK_THROWS_AS(eval_B(model, sigma, Field(9, 0.0)), ConformityError);
    const EnvPoint bad_sigma{{0.0, 0.5}};
    CHECK_THROWS_AS(eval_V(model, bad_sigma, Field(8, 0.0)), ConformityError);
}

}  // TEST_SUITE("environment")
