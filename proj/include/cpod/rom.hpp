#pragma once

#include <span>
#include <string>
#include <vector>

#include "cpod/burgers.hpp"
#include "cpod/ensemble.hpp"
#include "cpod/pod.hpp"
#include "cpod/tgcvt.hpp"

namespace cpod {

// Galerkin reduction of the Burgers theta-scheme around the affine family
// u = mean + A(t) lift + sum_l alpha_l phi_l. Reduced operators couple the
// modes against every family member, with members indexed
//   0 -> mean_state, 1 -> lift, 2.. -> modes,
// so one array serves both sides of the step equation: columns 2.. feed the
// step matrix acting on alpha, columns 0..1 feed the right-hand side.
struct ReducedOperators {
  Eigen::Index dim = 0;
  Eigen::MatrixXd kred;               // d x (d+2), stiffness against family
  Eigen::VectorXd mass_lift;          // modes' mass inner product with lift
  std::vector<Eigen::MatrixXd> conv;  // d+2 blocks d x (d+2): linearized term
  std::vector<Eigen::MatrixXd> quad;  // d+2 blocks d x (d+2): quadratic term
  PodBasis basis;
  LiftingData lifting;
  FomConfig config;
};

// Precomputes the reduced arrays. Requires an inlet-admissible family:
// modes and mean_state vanish at the inlet node so the Dirichlet row is
// carried entirely by the lifting term.
ReducedOperators build_reduced(const FomConfig& config, const PodBasis& basis,
                               const LiftingData& lifting);

struct RomResult {
  Eigen::MatrixXd alpha;  // (m+1) x d, row i = coordinates at t_i = i*dt
  RandomInput input;
  int label = -1;         // cluster whose operators produced the run
  double wall_seconds = 0.0;
};

// Marches the reduced coordinates through the same Newton-linearized
// theta-steps as the full solver, starting from the projection of the
// initial modified state.
RomResult solve_rom(const ReducedOperators& ops, const RandomInput& input);

// mean + A(t_step) lift + modes * alpha(t_step), 0 <= step <= m.
Snapshot reconstruct(const RomResult& result, const ReducedOperators& ops,
                     Eigen::Index step);

// Cluster whose subspace best captures the modified trajectory; ties go to
// the lowest index so ground-truth labels are reproducible.
Eigen::Index true_label(const Trajectory& modified, const Tessellation& tess);

// One evaluated test sample: squared space-time error of the reconstruction
// against the full solve, and the full solve's own squared norm.
struct EvaluatedPair {
  double err_sq = 0.0;
  double ref_sq_norm = 0.0;
};

EvaluatedPair rom_error(const Trajectory& fom, const RomResult& rom,
                        const ReducedOperators& ops);

// Monte Carlo error statistics: mean and Bessel-corrected variance of the
// squared space-time errors, plus relative versions that scale each sample
// by its own reference norm before averaging.
struct ErrorStats {
  double mean = 0.0;
  double variance = 0.0;
  double mean_rel = 0.0;
  double variance_rel = 0.0;
  std::vector<double> per_sample;
  std::vector<double> per_sample_rel;
};

ErrorStats error_stats(std::span<const EvaluatedPair> pairs);

// Exact projection-level energy identity on labelled training data: the
// direct residual sum equals the spectral tail sum cluster by cluster.
struct EnergyIdentity {
  double direct = 0.0;    // (dt/n) * clustering energy, summed directly
  double spectral = 0.0;  // (dt/n) * sum_k n_k j_k * discarded tail of k
  double rel_gap = 0.0;
};

EnergyIdentity training_energy_identity(const Ensemble& modified,
                                        const Tessellation& tess);

// Reduced coordinate history as CSV rows (t, alpha_1..alpha_d).
void save_alpha_csv(const RomResult& result, double dt,
                    const std::string& path);

}  // namespace cpod
