#include "cpod/ensemble.hpp"

#include <cmath>

#include "cpod/error.hpp"

namespace cpod {

SpatialGrid SpatialGrid::uniform(Eigen::Index node_count) {
  if (node_count < 2) throw Error("config", "grid needs at least 2 nodes");
  Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(node_count, 0.0, 1.0);
  return from_nodes(std::move(nodes));
}

SpatialGrid SpatialGrid::from_nodes(Eigen::VectorXd nodes) {
  const Eigen::Index m = nodes.size();
  if (m < 2) throw Error("config", "grid needs at least 2 nodes");
  Eigen::VectorXd w(m);
  w(0) = 0.5 * (nodes(1) - nodes(0));
  for (Eigen::Index i = 1; i + 1 < m; ++i)
    w(i) = 0.5 * (nodes(i + 1) - nodes(i - 1));
  w(m - 1) = 0.5 * (nodes(m - 1) - nodes(m - 2));
  SpatialGrid g{std::move(nodes), std::move(w)};
  g.validate();
  return g;
}

void SpatialGrid::validate() const {
  const Eigen::Index m = nodes.size();
  if (m < 2 || weights.size() != m)
    throw Error("dimension", "grid nodes/weights size mismatch");
  if (nodes(0) != 0.0 || std::abs(nodes(m - 1) - 1.0) > 1e-12)
    throw Error("domain", "grid must span [0,1]");
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    if (!(nodes(i) < nodes(i + 1)))
      throw Error("domain", "grid nodes must increase strictly");
  if (!(weights.minCoeff() > 0.0))
    throw Error("domain", "grid weights must be positive");
  const double span = nodes(m - 1) - nodes(0);
  if (std::abs(weights.sum() - span) > 1e-12)
    throw Error("domain", "grid weights must sum to the domain length");
}

void TimeGrid::validate() const {
  if (!(dt > 0.0)) throw Error("config", "time step must be positive");
  if (snapshot_count < 1) throw Error("config", "need at least one snapshot");
}

void Ensemble::validate() const {
  grid.validate();
  time.validate();
  const Eigen::Index m = grid.size();
  for (const auto& traj : trajectories) {
    if (traj.snaps.rows() != m || traj.snaps.cols() != time.snapshot_count)
      throw Error("dimension", "trajectory shape disagrees with grids");
    if (!traj.snaps.allFinite())
      throw Error("nonfinite", "trajectory contains non-finite values");
    if (traj.input.strength.size() != time.snapshot_count + 1)
      throw Error("dimension", "input strength length must be J+1");
  }
}

double inner_product(const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b,
                     const SpatialGrid& grid) {
  if (a.size() != grid.size() || b.size() != grid.size())
    throw Error("dimension", "inner_product operand length mismatch");
  return grid.weights.cwiseProduct(a).dot(b);
}

double trajectory_sq_norm(const Trajectory& traj, const SpatialGrid& grid,
                          const TimeGrid& time) {
  if (traj.snaps.rows() != grid.size())
    throw Error("dimension", "trajectory rows disagree with grid");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < traj.snaps.cols(); ++j) {
    const auto col = traj.snaps.col(j);
    acc += grid.weights.cwiseProduct(col).dot(col);
  }
  return time.dt * acc;
}

Eigen::MatrixXd stack_snapshots(const Ensemble& ensemble,
                                const std::vector<Eigen::Index>& trajectories,
                                Eigen::Index stride) {
  if (stride < 1) throw Error("config", "stride must be >= 1");
  const Eigen::Index j_all = ensemble.time.snapshot_count;
  const Eigen::Index j_kept = j_all / stride;
  if (j_kept < 1) throw Error("config", "stride leaves no snapshots");
  Eigen::MatrixXd out(ensemble.grid.size(),
                      j_kept * static_cast<Eigen::Index>(trajectories.size()));
  Eigen::Index col = 0;
  for (Eigen::Index ti : trajectories) {
    if (ti < 0 || ti >= ensemble.sample_count())
      throw Error("domain", "trajectory index out of range");
    const auto& snaps = ensemble.trajectories[static_cast<std::size_t>(ti)].snaps;
    for (Eigen::Index j = stride - 1; j < j_all; j += stride)
      out.col(col++) = snaps.col(j);
  }
  return out;
}

}  // namespace cpod
