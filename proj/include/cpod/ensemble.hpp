#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace cpod {

// A snapshot is the nodal field at one time instant.
using Snapshot = Eigen::VectorXd;

// 1D spatial grid on [0,1] with positive quadrature weights. The weights
// double as the lumped mass matrix diagonal, so the discrete inner product
// below and the FEM mass term are one and the same object.
struct SpatialGrid {
  Eigen::VectorXd nodes;    // strictly increasing, nodes[0] = 0, nodes[M-1] = 1
  Eigen::VectorXd weights;  // positive, sums to the domain length

  Eigen::Index size() const { return nodes.size(); }

  // Uniform grid with trapezoid weights h/2, h, ..., h, h/2.
  static SpatialGrid uniform(Eigen::Index node_count);

  // Trapezoid weights for arbitrary strictly increasing nodes.
  static SpatialGrid from_nodes(Eigen::VectorXd nodes);

  void validate() const;
};

// Uniform time grid: J snapshot instants t_j = j*dt for j = 1..J, with the
// initial instant t_0 = 0 carrying the (unstored) initial state.
struct TimeGrid {
  double dt = 0.0;
  Eigen::Index snapshot_count = 0;  // J

  double horizon() const { return dt * static_cast<double>(snapshot_count); }
  // Time of stored snapshot column j (0-based): t_{j+1}.
  double snapshot_instant(Eigen::Index j) const {
    return dt * static_cast<double>(j + 1);
  }

  void validate() const;
};

enum class StrengthKind : std::uint32_t { Constant = 0, Trig = 1, Hat = 2 };

// One sampled inflow-strength signal: values A(t_0), ..., A(t_J) plus the
// latent-draw provenance needed to regenerate it.
struct RandomInput {
  Eigen::VectorXd strength;  // length J+1
  StrengthKind kind = StrengthKind::Constant;
  std::uint64_t seed = 0;
};

// One realization: the input that drove it and the states it produced.
// Column j of snaps is the field at t_{j+1}; the initial state is implied
// by the solver's initial condition.
struct Trajectory {
  RandomInput input;
  Eigen::MatrixXd snaps;  // M x J
};

struct Ensemble {
  SpatialGrid grid;
  TimeGrid time;
  std::vector<Trajectory> trajectories;

  Eigen::Index sample_count() const {
    return static_cast<Eigen::Index>(trajectories.size());
  }

  void validate() const;
};

// Weighted discrete L2 inner product sum_i w_i a_i b_i.
double inner_product(const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b,
                     const SpatialGrid& grid);

// Squared space-time norm dt * sum_j <u_j, u_j>.
double trajectory_sq_norm(const Trajectory& traj, const SpatialGrid& grid,
                          const TimeGrid& time);

// Snapshots of the selected trajectories stacked as columns, optionally
// keeping only every stride-th snapshot (columns stride-1, 2*stride-1, ...).
Eigen::MatrixXd stack_snapshots(const Ensemble& ensemble,
                                const std::vector<Eigen::Index>& trajectories,
                                Eigen::Index stride = 1);

}  // namespace cpod
