#pragma once

#include "cpod/ensemble.hpp"

namespace cpod {

// Orthonormal reduced basis extracted from a snapshot family, together with
// the full correlation spectrum it came from. The spectrum keeps one entry
// per snapshot (trailing exact zeros included) so energy sums over the whole
// index range stay well defined.
struct PodBasis {
  Eigen::MatrixXd modes;    // M x dim, orthonormal in the grid inner product
  Eigen::VectorXd eigvals;  // descending, one entry per snapshot
  Eigen::Index dim = 0;
  SpatialGrid grid;

  void validate() const;
};

// Snapshot correlation R_ij = (1/N) <v_i, v_j>; snapshots are the columns.
Eigen::MatrixXd correlation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& snaps,
                                   const SpatialGrid& grid);

struct SymEig {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns, aligned with values
};

// Dense symmetric eigendecomposition; rejects visibly non-symmetric input.
SymEig sym_eig(const Eigen::Ref<const Eigen::MatrixXd>& matrix);

// Method-of-snapshots basis of retained dimension dim. When the node count
// is below the snapshot count the equivalent weighted spatial covariance
// problem is solved instead; the nonzero spectrum is identical.
PodBasis pod_basis(const Eigen::Ref<const Eigen::MatrixXd>& snaps,
                   const SpatialGrid& grid, Eigen::Index dim);

// Discarded-tail energy T * sum_{j > dim} sigma_j.
double pod_energy(const Eigen::Ref<const Eigen::VectorXd>& eigvals,
                  Eigen::Index dim, double horizon);

// Smallest dimension whose cumulative spectrum share reaches ratio.
Eigen::Index select_dimension(const Eigen::Ref<const Eigen::VectorXd>& eigvals,
                              double ratio);

// Orthogonal projection onto the basis span.
Snapshot project(const Eigen::Ref<const Eigen::VectorXd>& snapshot,
                 const PodBasis& basis);

}  // namespace cpod
