#include "cpod/burgers.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cpod/error.hpp"
#include "cpod/rng.hpp"
#include "fem_ops.hpp"

namespace cpod {

namespace {

using fem::Tridiag;
using fem::add_conv_linearized;
using fem::convection_rhs;
using fem::stiffness;

Snapshot newton_steady(const FomConfig& config, double strength,
                       const std::function<double(double x)>* source) {
  const SpatialGrid grid = config.make_grid();
  const Eigen::Index m = grid.size();
  const double h = grid.nodes(1) - grid.nodes(0);
  const double inv_re = 1.0 / config.reynolds;
  const Tridiag k = stiffness(m, h);

  Eigen::VectorXd forcing = Eigen::VectorXd::Zero(m);
  if (source)
    for (Eigen::Index i = 0; i < m; ++i)
      forcing(i) = grid.weights(i) * (*source)(grid.nodes(i));

  const double inlet = strength * config.inlet_scale;
  Snapshot u = Snapshot::Constant(m, inlet);

  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd residual = inv_re * k.apply(u) + convection_rhs(u) - forcing;
    residual(0) = u(0) - inlet;
    if (residual.cwiseAbs().maxCoeff() <= 1e-12) return u;

    Tridiag jac(m);
    jac.diag = inv_re * k.diag;
    jac.sub = inv_re * k.sub;
    jac.sup = inv_re * k.sup;
    add_conv_linearized(jac, u);
    jac.diag(0) = 1.0;
    jac.sup(0) = 0.0;
    u -= jac.solve(residual);
    if (!u.allFinite())
      throw Error("nonfinite", "steady solve diverged at Newton step " +
                                   std::to_string(it + 1));
  }
  throw Error("convergence", "steady solve: Newton did not reach 1e-12");
}

Trajectory theta_march(const FomConfig& config, const RandomInput& input,
                       Snapshot u, const SourceFn* source) {
  config.validate();
  const Eigen::Index m_steps = config.steps;
  if (input.strength.size() != m_steps + 1)
    throw Error("dimension", "strength needs steps+1 samples");
  if (!input.strength.allFinite())
    throw Error("nonfinite", "strength contains non-finite values");

  const SpatialGrid grid = config.make_grid();
  const Eigen::Index m = grid.size();
  if (u.size() != m) throw Error("dimension", "initial state length mismatch");
  const double h = grid.nodes(1) - grid.nodes(0);
  const double dt = config.dt();
  const double theta = config.theta;
  const double mass_coef = 1.0 / (theta * dt);
  const double inv_re = 1.0 / config.reynolds;
  const Tridiag k = stiffness(m, h);

  Trajectory traj;
  traj.input = input;
  traj.snaps.resize(m, m_steps);

  for (Eigen::Index step = 0; step < m_steps; ++step) {
    const double a_prev = input.strength(step);
    const double a_next = input.strength(step + 1);
    const double a_theta = theta * a_next + (1.0 - theta) * a_prev;

    Tridiag sys(m);
    sys.diag = mass_coef * grid.weights + inv_re * k.diag;
    sys.sub = inv_re * k.sub;
    sys.sup = inv_re * k.sup;
    add_conv_linearized(sys, u);

    Eigen::VectorXd rhs =
        mass_coef * grid.weights.cwiseProduct(u) + convection_rhs(u);
    if (source) {
      const double t_theta =
          (static_cast<double>(step) + theta) * dt;
      for (Eigen::Index i = 0; i < m; ++i)
        rhs(i) += grid.weights(i) * (*source)(t_theta, grid.nodes(i));
    }

    sys.diag(0) = 1.0;
    sys.sup(0) = 0.0;
    rhs(0) = a_theta * config.inlet_scale;

    const Eigen::VectorXd u_theta = sys.solve(rhs);
    u += (u_theta - u) / theta;
    u(0) = a_next * config.inlet_scale;  // exact inlet imposition
    if (!u.allFinite())
      throw Error("nonfinite",
                  "state became non-finite at step " + std::to_string(step + 1));
    traj.snaps.col(step) = u;
  }
  return traj;
}

}  // namespace

void FomConfig::validate() const {
  if (!(reynolds > 0.0)) throw Error("config", "Reynolds number must be positive");
  if (node_count < 3) throw Error("config", "need at least 3 nodes");
  if (!(horizon > 0.0)) throw Error("config", "horizon must be positive");
  if (steps < 1) throw Error("config", "need at least one step");
  if (!(inlet_scale != 0.0) || !std::isfinite(inlet_scale))
    throw Error("config", "inlet scale must be finite and nonzero");
  if (!(theta > 0.0) || theta > 1.0)
    throw Error("config", "theta must lie in (0, 1]");
  if (lift_hi == lift_lo)
    throw Error("config", "lifting strengths must differ");
}

RandomInput trig_strength(const TrigStrengthParams& params, const TimeGrid& time,
                          const Eigen::Ref<const Eigen::VectorXd>& draws) {
  time.validate();
  if (params.terms < 1) throw Error("config", "need at least one term");
  if (draws.size() != 2 * params.terms)
    throw Error("dimension", "trig strength needs 2*terms draws");
  const Eigen::Index j = time.snapshot_count;
  RandomInput input;
  input.kind = StrengthKind::Trig;
  input.strength.resize(j + 1);
  for (Eigen::Index idx = 0; idx <= j; ++idx) {
    const double t = time.dt * static_cast<double>(idx);
    double acc = params.base;
    for (Eigen::Index i = 1; i <= params.terms; ++i) {
      const double phase = std::numbers::pi * static_cast<double>(i) * t;
      acc += params.sigma / static_cast<double>(i) *
             (std::sin(phase) * draws(2 * (i - 1)) +
              std::cos(phase) * draws(2 * (i - 1) + 1));
    }
    input.strength(idx) = acc;
  }
  return input;
}

RandomInput sample_trig_strength(const TrigStrengthParams& params,
                                 const TimeGrid& time, std::uint64_t seed) {
  RandomStream rng(seed);
  const auto raw = rng.normals(static_cast<std::size_t>(2 * params.terms));
  const Eigen::Map<const Eigen::VectorXd> draws(raw.data(),
                                                static_cast<Eigen::Index>(raw.size()));
  RandomInput input = trig_strength(params, time, draws);
  input.seed = seed;
  return input;
}

RandomInput hat_strength(double height, double sigma, const TimeGrid& time,
                         const Eigen::Ref<const Eigen::VectorXd>& draws) {
  time.validate();
  const Eigen::Index j = time.snapshot_count;
  if (draws.size() != j)
    throw Error("dimension", "hat strength needs one draw per step");
  const double t_half = 0.5 * time.horizon();
  const double noise_scale = sigma / std::sqrt(time.dt);
  RandomInput input;
  input.kind = StrengthKind::Hat;
  input.strength.resize(j + 1);
  for (Eigen::Index idx = 0; idx <= j; ++idx) {
    const double t = time.dt * static_cast<double>(idx);
    const double ridge =
        t <= t_half ? 60.0 * (1.0 + height * t)
                    : 60.0 * (1.0 + height * (time.horizon() - t));
    const Eigen::Index interval = idx < j ? idx : j - 1;
    input.strength(idx) = ridge + noise_scale * draws(interval);
  }
  return input;
}

RandomInput sample_hat_strength(double height, double sigma,
                                const TimeGrid& time, std::uint64_t seed) {
  RandomStream rng(seed);
  const auto raw = rng.normals(static_cast<std::size_t>(time.snapshot_count));
  const Eigen::Map<const Eigen::VectorXd> draws(raw.data(),
                                                static_cast<Eigen::Index>(raw.size()));
  RandomInput input = hat_strength(height, sigma, time, draws);
  input.seed = seed;
  return input;
}

Snapshot solve_steady(const FomConfig& config, double strength) {
  config.validate();
  return newton_steady(config, strength, nullptr);
}

Snapshot solve_steady_forced(const FomConfig& config, double strength,
                             const std::function<double(double x)>& source) {
  config.validate();
  return newton_steady(config, strength, &source);
}

Snapshot build_lifting(const FomConfig& config) {
  config.validate();
  const Snapshot hi = solve_steady(config, config.lift_hi);
  const Snapshot lo = solve_steady(config, config.lift_lo);
  Snapshot lift = (hi - lo) / (config.lift_hi - config.lift_lo);
  if (std::abs(lift(0) - config.inlet_scale) >
      1e-10 * std::abs(config.inlet_scale))
    throw Error("domain", "lifting inlet value drifted from the inlet scale");
  return lift;
}

Snapshot initial_state(const FomConfig& config, const RandomInput& input) {
  if (input.strength.size() < 1)
    throw Error("dimension", "input strength is empty");
  Snapshot u = Snapshot::Zero(config.node_count);
  u(0) = input.strength(0) * config.inlet_scale;
  return u;
}

Trajectory solve_fom(const FomConfig& config, const RandomInput& input) {
  return theta_march(config, input, initial_state(config, input), nullptr);
}

Trajectory solve_fom_forced(const FomConfig& config, const RandomInput& input,
                            const Snapshot& initial, const SourceFn& source) {
  return theta_march(config, input, initial, &source);
}

Snapshot ensemble_mean(const Ensemble& ensemble, const Snapshot& lift) {
  ensemble.validate();
  if (ensemble.sample_count() < 1)
    throw Error("domain", "ensemble mean of an empty ensemble");
  if (lift.size() != ensemble.grid.size())
    throw Error("dimension", "lifting length disagrees with grid");
  const Eigen::Index j = ensemble.time.snapshot_count;
  Snapshot mean = Snapshot::Zero(ensemble.grid.size());
  for (const auto& traj : ensemble.trajectories) {
    const double strength_sum = traj.input.strength.tail(j).sum();
    mean += (traj.snaps.rowwise().sum() - strength_sum * lift) /
            static_cast<double>(j);
  }
  return mean / static_cast<double>(ensemble.sample_count());
}

Trajectory modified_state(const Trajectory& traj, const LiftingData& lifting,
                          const TimeGrid& time) {
  if (traj.snaps.cols() != time.snapshot_count)
    throw Error("dimension", "trajectory does not match the time grid");
  if (lifting.lift.size() != traj.snaps.rows() ||
      lifting.mean_state.size() != traj.snaps.rows())
    throw Error("dimension", "lifting length disagrees with trajectory");
  Trajectory out;
  out.input = traj.input;
  out.snaps.resizeLike(traj.snaps);
  for (Eigen::Index col = 0; col < traj.snaps.cols(); ++col)
    out.snaps.col(col) = traj.snaps.col(col) - lifting.mean_state -
                         traj.input.strength(col + 1) * lifting.lift;
  return out;
}

Ensemble modified_ensemble(const Ensemble& ensemble, const LiftingData& lifting) {
  Ensemble out;
  out.grid = ensemble.grid;
  out.time = ensemble.time;
  out.trajectories.reserve(ensemble.trajectories.size());
  for (const auto& traj : ensemble.trajectories)
    out.trajectories.push_back(modified_state(traj, lifting, ensemble.time));
  return out;
}

}  // namespace cpod
