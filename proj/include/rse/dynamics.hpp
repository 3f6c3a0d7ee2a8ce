#pragma once

#include <utility>
#include <vector>

#include "rse/environment.hpp"
#include "rse/grid.hpp"

namespace rse {

enum class Scheme { SemiImplicit, ExactFree };

struct SimState {
    double t = 0.0;
    Field u;
    EnvPoint sigma;  // fixed along a trajectory
};

struct CheckpointRecord {
    double t = 0.0;
    double mean_mode = 0.0;      // <u, 1>_H
    double fluct_normsq = 0.0;   // ||u - mean_mode * 1||_H^2
    Field field;                 // recorded only when requested
};

struct Trajectory {
    std::vector<CheckpointRecord> checkpoints;
};

/// Worker-local scratch buffers for the integrators. One instance per
/// trajectory worker; never shared.
struct StepWorkspace {
    std::vector<double> drift;
    std::vector<double> extra;
    std::vector<double> modes;
    std::vector<double> stage;
};

/// One step of the drift-explicit / Laplacian-implicit scheme
///   u+ = (I - (dt/2) Lap)^{-1} (u - dt (DV + B) + dW),
/// dW_i ~ N(0, dt/dx) per cell. The linear solve happens in the cosine
/// basis: mode k is divided by 1 + dt mu_k / 2. noise_scale = 0 suppresses
/// the noise (deterministic part only).
void advance_semi_implicit(const Grid& grid, const EnvModel& model, SimState& state, double dt,
                           RngStream& rng, StepWorkspace& ws, double noise_scale = 1.0);

/// Distributionally exact free-field transition (V = B = 0): mean mode
/// gains N(0, dt); mode k >= 1 is an Ornstein-Uhlenbeck update with decay
/// exp(-mu_k dt / 2) and innovation variance (1 - exp(-mu_k dt)) / mu_k.
void advance_exact_free(const Grid& grid, SimState& state, double dt, RngStream& rng,
                        StepWorkspace& ws, double noise_scale = 1.0);

// Pure single-step wrappers.
SimState step_semi_implicit(const Grid& grid, const EnvModel& model, const SimState& state,
                            double dt, RngStream& rng, double noise_scale = 1.0);
SimState step_exact_free(const Grid& grid, const SimState& state, double dt, RngStream& rng,
                         double noise_scale = 1.0);

/// Integrate from v0 under fixed sigma, recording mean mode and
/// fluctuation norm (optionally the full field) at each checkpoint time.
/// Checkpoint times must be multiples of dt, increasing, and at most T.
Trajectory simulate_trajectory(const Grid& grid, const EnvModel& model, const EnvPoint& sigma,
                               const Field& v0, double T, double dt,
                               const std::vector<double>& checkpoints, RngStream& rng,
                               Scheme scheme, bool record_fields = false);

/// Standard expression of a state: shape v_xi = u - u(0) * 1 (first-cell
/// value) and base environment tau_{u(0)} sigma.
std::pair<Field, EnvPoint> environment_view(const EnvModel& model, const SimState& state);

}  // namespace rse
