#include "cpod/rom.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "cpod/csv.hpp"
#include "cpod/error.hpp"
#include "cpod/numerics.hpp"
#include "fem_ops.hpp"

namespace cpod {

namespace {

constexpr double kInletTol = 1e-9;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

ReducedOperators build_reduced(const FomConfig& config, const PodBasis& basis,
                               const LiftingData& lifting) {
  config.validate();
  basis.validate();
  const SpatialGrid grid = config.make_grid();
  const Eigen::Index m = grid.size();
  const Eigen::Index d = basis.dim;
  if (basis.modes.rows() != m)
    throw Error("dimension", "basis lives on a different grid");
  if (lifting.lift.size() != m || lifting.mean_state.size() != m)
    throw Error("dimension", "lifting fields live on a different grid");

  // The ansatz carries the inlet value entirely through A(t) * lift, so the
  // other family members must vanish there and lift must hit the scale.
  for (Eigen::Index l = 0; l < d; ++l)
    if (std::abs(basis.modes(0, l)) > kInletTol)
      throw Error("admissibility", "mode " + std::to_string(l + 1) +
                                       " does not vanish at the inlet");
  if (std::abs(lifting.mean_state(0)) > kInletTol)
    throw Error("admissibility", "mean state does not vanish at the inlet");
  if (std::abs(lifting.lift(0) - config.inlet_scale) >
      kInletTol * std::max(1.0, std::abs(config.inlet_scale)))
    throw Error("admissibility", "lifting inlet value is off the inlet scale");

  const double h = grid.nodes(1) - grid.nodes(0);
  Eigen::MatrixXd fam(m, d + 2);
  fam.col(0) = lifting.mean_state;
  fam.col(1) = lifting.lift;
  fam.rightCols(d) = basis.modes;

  ReducedOperators ops;
  ops.dim = d;
  ops.basis = basis;
  ops.lifting = lifting;
  ops.config = config;

  const fem::Tridiag k = fem::stiffness(m, h);
  Eigen::MatrixXd applied(m, d + 2);
  for (Eigen::Index b = 0; b < d + 2; ++b) applied.col(b) = k.apply(fam.col(b));
  ops.kred = basis.modes.transpose() * applied;

  ops.mass_lift =
      basis.modes.transpose() * grid.weights.cwiseProduct(lifting.lift);

  ops.conv.resize(d + 2);
  ops.quad.resize(d + 2);
  Eigen::MatrixXd transported(m, d + 2);
  for (Eigen::Index a = 0; a < d + 2; ++a) {
    fem::Tridiag slope(m), transport(m);
    fem::add_conv_slope(slope, fam.col(a));
    fem::add_conv_transport(transport, fam.col(a));
    for (Eigen::Index b = 0; b < d + 2; ++b) {
      transported.col(b) = transport.apply(fam.col(b));
      applied.col(b) = transported.col(b) + slope.apply(fam.col(b));
    }
    ops.quad[a] = basis.modes.transpose() * transported;
    ops.conv[a] = basis.modes.transpose() * applied;
    if (!ops.quad[a].allFinite() || !ops.conv[a].allFinite())
      throw Error("nonfinite", "reduced convection arrays are not finite");
  }
  if (!ops.kred.allFinite() || !ops.mass_lift.allFinite())
    throw Error("nonfinite", "reduced stiffness arrays are not finite");
  return ops;
}

RomResult solve_rom(const ReducedOperators& ops, const RandomInput& input) {
  const auto t0 = std::chrono::steady_clock::now();
  const FomConfig& config = ops.config;
  const Eigen::Index m_steps = config.steps;
  if (input.strength.size() != m_steps + 1)
    throw Error("dimension", "strength needs steps+1 samples");
  if (!input.strength.allFinite())
    throw Error("nonfinite", "strength contains non-finite values");

  const SpatialGrid grid = config.make_grid();
  const double theta = config.theta;
  const double mass_coef = 1.0 / (theta * config.dt());
  const double inv_re = 1.0 / config.reynolds;
  const Eigen::Index d = ops.dim;

  RomResult result;
  result.input = input;
  result.alpha.resize(m_steps + 1, d);

  const Snapshot u0 = initial_state(config, input);
  const Eigen::VectorXd v0 =
      u0 - ops.lifting.mean_state - input.strength(0) * ops.lifting.lift;
  Eigen::VectorXd alpha =
      ops.basis.modes.transpose() * grid.weights.cwiseProduct(v0);
  result.alpha.row(0) = alpha.transpose();

  if (d == 0) {
    result.wall_seconds = seconds_since(t0);
    return result;
  }

  Eigen::VectorXd coeff(d + 2);  // family weights of the current state
  Eigen::MatrixXd lhs(d, d);
  Eigen::VectorXd rhs(d);
  for (Eigen::Index step = 0; step < m_steps; ++step) {
    const double a_prev = input.strength(step);
    const double a_next = input.strength(step + 1);
    const double a_theta = theta * a_next + (1.0 - theta) * a_prev;

    coeff(0) = 1.0;
    coeff(1) = a_prev;
    coeff.tail(d) = alpha;

    lhs = inv_re * ops.kred.rightCols(d);
    lhs.diagonal().array() += mass_coef;
    rhs = mass_coef * alpha - mass_coef * (a_theta - a_prev) * ops.mass_lift -
          inv_re * (ops.kred.col(0) + a_theta * ops.kred.col(1));
    for (Eigen::Index a = 0; a < d + 2; ++a) {
      lhs.noalias() += coeff(a) * ops.conv[a].rightCols(d);
      rhs.noalias() -=
          coeff(a) * (ops.conv[a].col(0) + a_theta * ops.conv[a].col(1));
      rhs.noalias() += coeff(a) * (ops.quad[a] * coeff);
    }

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
    if (!lu.isInvertible())
      throw Error("singular", "reduced step matrix is singular at step " +
                                  std::to_string(step + 1));
    const Eigen::VectorXd alpha_theta = lu.solve(rhs);
    alpha += (alpha_theta - alpha) / theta;
    if (!alpha.allFinite())
      throw Error("nonfinite", "reduced state became non-finite at step " +
                                   std::to_string(step + 1));
    result.alpha.row(step + 1) = alpha.transpose();
  }
  result.wall_seconds = seconds_since(t0);
  return result;
}

Snapshot reconstruct(const RomResult& result, const ReducedOperators& ops,
                     Eigen::Index step) {
  if (step < 0 || step >= result.alpha.rows())
    throw Error("dimension", "reconstruction step out of range");
  if (result.input.strength.size() != result.alpha.rows())
    throw Error("dimension", "input and coordinate history disagree");
  Snapshot u =
      ops.lifting.mean_state + result.input.strength(step) * ops.lifting.lift;
  if (ops.dim > 0)
    u.noalias() += ops.basis.modes * result.alpha.row(step).transpose();
  return u;
}

Eigen::Index true_label(const Trajectory& modified, const Tessellation& tess) {
  if (tess.centroids.empty())
    throw Error("config", "tessellation has no centroids");
  Eigen::Index best = 0;
  double best_dist = modified_distance_sq(modified, tess.centroids[0], tess.stride);
  for (std::size_t k = 1; k < tess.centroids.size(); ++k) {
    const double dist =
        modified_distance_sq(modified, tess.centroids[k], tess.stride);
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<Eigen::Index>(k);
    }
  }
  return best;
}

EvaluatedPair rom_error(const Trajectory& fom, const RomResult& rom,
                        const ReducedOperators& ops) {
  const SpatialGrid grid = ops.config.make_grid();
  const TimeGrid time = ops.config.make_time_grid();
  if (fom.snaps.rows() != grid.size())
    throw Error("dimension", "trajectory lives on a different grid");
  if (fom.snaps.cols() != ops.config.steps)
    throw Error("dimension", "trajectory length does not match the config");
  if (rom.alpha.rows() != ops.config.steps + 1)
    throw Error("dimension", "reduced history length does not match");

  std::vector<double> terms(static_cast<std::size_t>(fom.snaps.cols()));
  for (Eigen::Index j = 0; j < fom.snaps.cols(); ++j) {
    const Snapshot diff = fom.snaps.col(j) - reconstruct(rom, ops, j + 1);
    terms[static_cast<std::size_t>(j)] = inner_product(diff, diff, grid);
  }
  EvaluatedPair pair;
  pair.err_sq = time.dt * pairwise_sum(terms);
  pair.ref_sq_norm = trajectory_sq_norm(fom, grid, time);
  return pair;
}

ErrorStats error_stats(std::span<const EvaluatedPair> pairs) {
  const std::size_t n = pairs.size();
  if (n == 0) throw Error("domain", "error statistics need at least one pair");
  ErrorStats stats;
  stats.per_sample.resize(n);
  stats.per_sample_rel.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    stats.per_sample[i] = pairs[i].err_sq;
    if (!(pairs[i].ref_sq_norm > 0.0))
      throw Error("domain", "zero-norm reference trajectory in relative error");
    stats.per_sample_rel[i] = pairs[i].err_sq / pairs[i].ref_sq_norm;
  }
  const double count = static_cast<double>(n);
  stats.mean = pairwise_sum(stats.per_sample) / count;
  stats.mean_rel = pairwise_sum(stats.per_sample_rel) / count;
  if (n > 1) {
    std::vector<double> dev(n), dev_rel(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = stats.per_sample[i] - stats.mean;
      const double b = stats.per_sample_rel[i] - stats.mean_rel;
      dev[i] = a * a;
      dev_rel[i] = b * b;
    }
    stats.variance = pairwise_sum(dev) / (count - 1.0);
    stats.variance_rel = pairwise_sum(dev_rel) / (count - 1.0);
  }
  return stats;
}

EnergyIdentity training_energy_identity(const Ensemble& modified,
                                        const Tessellation& tess) {
  const Eigen::Index n = modified.sample_count();
  if (n == 0) throw Error("dimension", "empty ensemble");
  if (static_cast<Eigen::Index>(tess.labels.size()) != n)
    throw Error("dimension", "labels do not match the ensemble");

  const double scale = modified.time.dt / static_cast<double>(n);
  EnergyIdentity out;
  out.direct = scale * tgcvt_energy(modified, tess);

  const Eigen::Index j_used = modified.time.snapshot_count / tess.stride;
  std::vector<double> parts(tess.centroids.size());
  for (std::size_t k = 0; k < tess.centroids.size(); ++k) {
    const PodBasis& centroid = tess.centroids[k];
    const Eigen::Index len = centroid.eigvals.size();
    const Eigen::Index cut = std::min(centroid.dim, len);
    const double tail = pairwise_sum(std::span<const double>(
        centroid.eigvals.data() + cut, static_cast<std::size_t>(len - cut)));
    parts[k] = static_cast<double>(tess.populations[k]) *
               static_cast<double>(j_used) * tail;
  }
  out.spectral = scale * pairwise_sum(parts);
  out.rel_gap = std::abs(out.direct - out.spectral) /
                std::max({std::abs(out.direct), std::abs(out.spectral), 1e-300});
  return out;
}

void save_alpha_csv(const RomResult& result, double dt,
                    const std::string& path) {
  csv::Writer out(path);
  std::vector<std::string> cells{"t"};
  for (Eigen::Index l = 0; l < result.alpha.cols(); ++l)
    cells.push_back("alpha_" + std::to_string(l + 1));
  out.row_vec(cells);
  for (Eigen::Index i = 0; i < result.alpha.rows(); ++i) {
    cells.clear();
    cells.push_back(csv::fmt(dt * static_cast<double>(i)));
    for (Eigen::Index l = 0; l < result.alpha.cols(); ++l)
      cells.push_back(csv::fmt(result.alpha(i, l)));
    out.row_vec(cells);
  }
}

}  // namespace cpod
