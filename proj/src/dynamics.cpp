#include "rse/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace rse {

namespace {

constexpr double kBlowUpGuard = 1e6;

void ensure_sizes(StepWorkspace& ws, std::size_t n) {
    if (ws.drift.size() != n) {
        ws.drift.resize(n);
        ws.extra.resize(n);
        ws.modes.resize(n);
        ws.stage.resize(n);
    }
}

void check_finite_drift(const std::vector<double>& drift, const SimState& state, long step) {
    for (double d : drift) {
        if (!std::isfinite(d)) {
            throw BlowUpError("non-finite drift during semi-implicit step", state.t, step);
        }
    }
}

void check_blow_up(const Field& u, double t, long step) {
    for (double x : u) {
        if (!std::isfinite(x) || std::abs(x) > kBlowUpGuard) {
            throw BlowUpError("solution magnitude exceeded blow-up guard", t, step);
        }
    }
}

double record_mean_mode(const Grid& grid, const Field& u) {
    double acc = 0.0;
    for (double x : u) acc += x;
    return acc * grid.dx();
}

CheckpointRecord make_record(const Grid& grid, const SimState& state, bool record_field) {
    CheckpointRecord rec;
    rec.t = state.t;
    rec.mean_mode = record_mean_mode(grid, state.u);
    double normsq = 0.0;
    for (double x : state.u) normsq += x * x;
    normsq *= grid.dx();
    rec.fluct_normsq = std::max(0.0, normsq - rec.mean_mode * rec.mean_mode);
    if (record_field) rec.field = state.u;
    return rec;
}

}  // namespace

void advance_semi_implicit(const Grid& grid, const EnvModel& model, SimState& state, double dt,
                           RngStream& rng, StepWorkspace& ws, double noise_scale) {
    if (dt <= 0.0) throw ConfigError("step_semi_implicit: dt must be positive");
    const std::size_t n = grid.n_cells();
    grid.require_conforming(state.u, "step_semi_implicit");
    ensure_sizes(ws, n);

    eval_DV(model, state.sigma, state.u, ws.drift);
    if (model.has_drift()) {
        eval_B(model, state.sigma, state.u, ws.extra);
        for (std::size_t i = 0; i < n; ++i) ws.drift[i] += ws.extra[i];
    }
    check_finite_drift(ws.drift, state, -1);

    const double noise_sd = noise_scale * std::sqrt(dt / grid.dx());
    for (std::size_t i = 0; i < n; ++i) {
        ws.stage[i] = state.u[i] - dt * ws.drift[i] + noise_sd * rng.normal();
    }

    cosine_forward(grid, ws.stage, ws.modes);
    const auto& mu = grid.eigenvalues();
    for (std::size_t k = 0; k < n; ++k) ws.modes[k] /= 1.0 + 0.5 * dt * mu[k];
    cosine_inverse(grid, ws.modes, std::span<double>(state.u));

    state.t += dt;
}

void advance_exact_free(const Grid& grid, SimState& state, double dt, RngStream& rng,
                        StepWorkspace& ws, double noise_scale) {
    if (dt <= 0.0) throw ConfigError("step_exact_free: dt must be positive");
    const std::size_t n = grid.n_cells();
    grid.require_conforming(state.u, "step_exact_free");
    ensure_sizes(ws, n);

    cosine_forward(grid, std::span<const double>(state.u), ws.modes);
    const auto& mu = grid.eigenvalues();
    ws.modes[0] += noise_scale * std::sqrt(dt) * rng.normal();
    for (std::size_t k = 1; k < n; ++k) {
        const double decay = std::exp(-0.5 * mu[k] * dt);
        const double innovation_var = -std::expm1(-mu[k] * dt) / mu[k];
        ws.modes[k] = decay * ws.modes[k] + noise_scale * std::sqrt(innovation_var) * rng.normal();
    }
    cosine_inverse(grid, ws.modes, std::span<double>(state.u));

    state.t += dt;
}

SimState step_semi_implicit(const Grid& grid, const EnvModel& model, const SimState& state,
                            double dt, RngStream& rng, double noise_scale) {
    SimState next = state;
    StepWorkspace ws;
    advance_semi_implicit(grid, model, next, dt, rng, ws, noise_scale);
    return next;
}

SimState step_exact_free(const Grid& grid, const SimState& state, double dt, RngStream& rng,
                         double noise_scale) {
    SimState next = state;
    StepWorkspace ws;
    advance_exact_free(grid, next, dt, rng, ws, noise_scale);
    return next;
}

Trajectory simulate_trajectory(const Grid& grid, const EnvModel& model, const EnvPoint& sigma,
                               const Field& v0, double T, double dt,
                               const std::vector<double>& checkpoints, RngStream& rng,
                               Scheme scheme, bool record_fields) {
    grid.require_conforming(v0, "simulate_trajectory");
    if (dt <= 0.0) throw ConfigError("simulate_trajectory: dt must be positive");
    if (T < 0.0) throw ConfigError("simulate_trajectory: T must be nonnegative");
    if (scheme == Scheme::ExactFree && (model.kind() != EnvKind::Zero || model.has_drift())) {
        throw ConfigError("exact free-field scheme requires the zero environment");
    }

    // Checkpoint times must sit on the step lattice.
    std::vector<long> checkpoint_steps;
    checkpoint_steps.reserve(checkpoints.size());
    long prev = -1;
    for (double tc : checkpoints) {
        if (tc < 0.0 || tc > T + 1e-9 * std::max(1.0, T)) {
            throw ConfigError("simulate_trajectory: checkpoint outside [0, T]");
        }
        const long step = std::lround(tc / dt);
        if (std::abs(static_cast<double>(step) * dt - tc) > 1e-9 * std::max(1.0, tc)) {
            throw ConfigError("simulate_trajectory: checkpoint is not a multiple of dt");
        }
        if (step <= prev) throw ConfigError("simulate_trajectory: checkpoints must increase");
        prev = step;
        checkpoint_steps.push_back(step);
    }

    SimState state{0.0, v0, sigma};
    Trajectory traj;
    traj.checkpoints.reserve(checkpoint_steps.size());
    StepWorkspace ws;

    std::size_t next_checkpoint = 0;
    if (T == 0.0 || checkpoint_steps.empty()) {
        traj.checkpoints.push_back(make_record(grid, state, record_fields));
        return traj;
    }
    if (checkpoint_steps[0] == 0) {
        traj.checkpoints.push_back(make_record(grid, state, record_fields));
        ++next_checkpoint;
    }

    const long last_step = checkpoint_steps.back();
    for (long step = 1; step <= last_step; ++step) {
        try {
            if (scheme == Scheme::SemiImplicit) {
                advance_semi_implicit(grid, model, state, dt, rng, ws);
            } else {
                advance_exact_free(grid, state, dt, rng, ws);
            }
            check_blow_up(state.u, state.t, step);
        } catch (const BlowUpError& e) {
            throw BlowUpError(std::string(e.what()) + " (trajectory step " +
                                  std::to_string(step) + ")",
                              state.t, step);
        }
        if (next_checkpoint < checkpoint_steps.size() && step == checkpoint_steps[next_checkpoint]) {
            // exact checkpoint time, free of dt accumulation error
            state.t = static_cast<double>(step) * dt;
            traj.checkpoints.push_back(make_record(grid, state, record_fields));
            ++next_checkpoint;
        }
    }
    return traj;
}

std::pair<Field, EnvPoint> environment_view(const EnvModel& model, const SimState& state) {
    Field shape = state.u;
    const double base_level = state.u.empty() ? 0.0 : state.u[0];
    for (auto& x : shape) x -= base_level;
    return {std::move(shape), shift_env(model, state.sigma, base_level)};
}

}  // namespace rse
