#pragma once

#include <cstdint>
#include <vector>

#include "cpod/ensemble.hpp"
#include "cpod/pod.hpp"
#include "cpod/rng.hpp"

namespace cpod {

// Clustering of trajectories where each cluster's representative is a POD
// subspace of its members' snapshots and distances are squared projection
// residuals summed over snapshot instants.
struct Tessellation {
  Eigen::Index cluster_count = 0;          // K
  std::vector<Eigen::Index> labels;        // per trajectory, 0-based
  std::vector<PodBasis> centroids;         // K subspace representatives
  std::vector<Eigen::Index> populations;   // members per cluster
  double energy = 0.0;                     // direct-sum clustering energy
  Eigen::VectorXd energy_ratios;           // captured spectrum share per cluster
  Eigen::Index stride = 1;                 // snapshot stride used throughout

  // Diagnostics of the winning Lloyd run.
  Eigen::Index iterations = 0;
  bool converged = false;
  Eigen::Index reseed_count = 0;
  Eigen::Index restart_index = 0;
  std::vector<double> energy_history;  // initial + after each assign/update
};

struct LloydOptions {
  std::vector<Eigen::Index> dims;  // per-cluster subspace dimension, size K
  Eigen::Index max_iter = 50;
  Eigen::Index restarts = 1;
  Eigen::Index stride = 1;
};

// Squared projection-residual distance sum_j |u_j - P u_j|^2 over the
// strided snapshot instants.
double modified_distance_sq(const Trajectory& traj, const PodBasis& basis,
                            Eigen::Index stride = 1);

// Nearest-centroid labels; exact ties (relative tolerance 1e-12) are broken
// uniformly at random from the tied set.
std::vector<Eigen::Index> assign(const Ensemble& ensemble,
                                 const std::vector<PodBasis>& centroids,
                                 RandomStream& rng, Eigen::Index stride = 1);

// Per-cluster POD of member snapshots; a cluster with no members throws
// (the Lloyd driver re-seeds empties before updating).
std::vector<PodBasis> update_centroids(const Ensemble& ensemble,
                                       const std::vector<Eigen::Index>& labels,
                                       const std::vector<Eigen::Index>& dims,
                                       Eigen::Index stride = 1);

// Lloyd iteration from a seeded balanced random partition, best of
// options.restarts independent starts (lowest energy kept).
Tessellation lloyd_tgcvt(const Ensemble& ensemble, Eigen::Index cluster_count,
                         const LloydOptions& options, std::uint64_t seed);

// Direct-sum clustering energy of a tessellation.
double tgcvt_energy(const Ensemble& ensemble, const Tessellation& tess);

// Captured spectrum share per cluster.
Eigen::VectorXd cluster_energy_ratios(const std::vector<PodBasis>& centroids,
                                      const std::vector<Eigen::Index>& dims);

// Plain k-means on point columns, same tie/empty-cluster policy; kept as the
// point-space specialization the subspace method generalizes.
struct CvtResult {
  std::vector<Eigen::Index> labels;
  Eigen::MatrixXd generators;  // dim x K, cluster means
  double energy = 0.0;
  Eigen::Index iterations = 0;
  bool converged = false;
};

CvtResult classic_cvt(const Eigen::Ref<const Eigen::MatrixXd>& points,
                      Eigen::Index cluster_count, Eigen::Index max_iter,
                      std::uint64_t seed, Eigen::Index restarts = 1);

}  // namespace cpod
