#pragma once

#include <cstdint>
#include <functional>

#include "cpod/ensemble.hpp"

namespace cpod {

// Viscous Burgers flow on (0,1): u_t - (1/Re) u_xx + u u_x = 0, driven by a
// time-varying inlet value A(t) * inlet_scale at x = 0 with zero-flux
// outflow at x = 1. P1 elements on a uniform grid, lumped mass, and a
// theta-step with the convection linearized about the previous state, so
// each step costs one tridiagonal solve.
struct FomConfig {
  double reynolds = 500.0;
  Eigen::Index node_count = 129;  // M
  double horizon = 2.0;           // T
  Eigen::Index steps = 400;       // m; snapshots recorded every step
  double inlet_scale = 0.01;      // s
  double theta = 0.5;
  double lift_hi = 2.0;  // strengths of the two steady solves
  double lift_lo = 1.0;  // feeding the lifting function

  double dt() const { return horizon / static_cast<double>(steps); }
  SpatialGrid make_grid() const { return SpatialGrid::uniform(node_count); }
  TimeGrid make_time_grid() const { return TimeGrid{dt(), steps}; }

  void validate() const;
};

// Inlet lifting profile and the ensemble-time mean state; together they
// homogenize trajectories via v = u - mean_state - A(t) * lift.
struct LiftingData {
  Snapshot lift;        // inlet value equals inlet_scale
  Snapshot mean_state;  // zero at the inlet
};

// Smooth random strength: base + sigma * sum_i (1/i) (sin(pi i t) g1_i +
// cos(pi i t) g2_i), evaluated at t_j = j*dt for j = 0..J. draws holds the
// standard normal pairs (g1_1, g2_1, g1_2, ...), length 2*terms.
struct TrigStrengthParams {
  double base = 70.0;
  double sigma = 12.0;
  Eigen::Index terms = 100;
};

RandomInput trig_strength(const TrigStrengthParams& params, const TimeGrid& time,
                          const Eigen::Ref<const Eigen::VectorXd>& draws);
RandomInput sample_trig_strength(const TrigStrengthParams& params,
                                 const TimeGrid& time, std::uint64_t seed);

// Piecewise-linear ridge 60*(1 + height*t) rising to the half-horizon then
// falling symmetrically, plus white noise sigma/sqrt(dt) held constant on
// each step interval [t_j, t_j+1); the final instant reuses the last
// interval's draw. draws holds J standard normals.
RandomInput hat_strength(double height, double sigma, const TimeGrid& time,
                         const Eigen::Ref<const Eigen::VectorXd>& draws);
RandomInput sample_hat_strength(double height, double sigma,
                                const TimeGrid& time, std::uint64_t seed);

// Steady state with constant inlet strength a (Newton, residual <= 1e-12).
Snapshot solve_steady(const FomConfig& config, double strength);

// Divided difference of two steady solves; the discrete inlet condition
// makes its inlet value exactly inlet_scale.
Snapshot build_lifting(const FomConfig& config);

// Initial state: zero except the inlet node at A(0) * inlet_scale.
Snapshot initial_state(const FomConfig& config, const RandomInput& input);

Trajectory solve_fom(const FomConfig& config, const RandomInput& input);

// Verification hooks: same discretizations with a source term f(t, x) and a
// caller-chosen initial state, for manufactured-solution studies.
using SourceFn = std::function<double(double t, double x)>;
Trajectory solve_fom_forced(const FomConfig& config, const RandomInput& input,
                            const Snapshot& initial, const SourceFn& source);
Snapshot solve_steady_forced(const FomConfig& config, double strength,
                             const std::function<double(double x)>& source);

// Ensemble-time mean of the lifted-out states (1/n) sum_i (1/J) sum_j
// (u_ij - A_i(t_j) * lift).
Snapshot ensemble_mean(const Ensemble& ensemble, const Snapshot& lift);

// v_j = u_j - mean_state - A(t_j) * lift for every stored snapshot.
Trajectory modified_state(const Trajectory& traj, const LiftingData& lifting,
                          const TimeGrid& time);
Ensemble modified_ensemble(const Ensemble& ensemble, const LiftingData& lifting);

}  // namespace cpod
