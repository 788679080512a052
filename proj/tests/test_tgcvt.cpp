#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cpod/ensemble.hpp"
#include "cpod/error.hpp"
#include "cpod/pod.hpp"
#include "cpod/rng.hpp"
#include "cpod/tgcvt.hpp"

using namespace cpod;

namespace {

// Two shape families on a coarse grid: sine-bumps and tanh-steps, each with
// a second smaller component so d = 1 leaves a nonzero residual.
Ensemble two_families(Eigen::Index per_family = 3) {
  Ensemble e;
  e.grid = SpatialGrid::uniform(9);
  e.time = TimeGrid{0.25, 3};
  const auto& x = e.grid.nodes;
  Eigen::VectorXd sine(9), sine2(9), step(9), ramp(9);
  for (Eigen::Index a = 0; a < 9; ++a) {
    sine(a) = std::sin(std::numbers::pi * x(a));
    sine2(a) = std::sin(2.0 * std::numbers::pi * x(a));
    step(a) = std::tanh(8.0 * (x(a) - 0.5));
    ramp(a) = x(a);
  }
  for (Eigen::Index i = 0; i < 2 * per_family; ++i) {
    const bool first = i < per_family;
    Trajectory traj;
    traj.input.strength = Eigen::VectorXd::Zero(4);
    traj.snaps.resize(9, 3);
    const double scale = 1.0 + 0.1 * static_cast<double>(i % per_family);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double mix = 0.2 * static_cast<double>(j + 1);
      if (first)
        traj.snaps.col(j) = scale * sine + mix * sine2;
      else
        traj.snaps.col(j) = scale * step + mix * ramp;
    }
    e.trajectories.push_back(traj);
  }
  return e;
}

PodBasis hand_basis(const SpatialGrid& grid, const Eigen::MatrixXd& modes) {
  PodBasis basis;
  basis.grid = grid;
  basis.modes = modes;
  basis.dim = modes.cols();
  basis.eigvals = Eigen::VectorXd::Zero(std::max<Eigen::Index>(modes.cols(), 1));
  return basis;
}

double partition_energy(const Ensemble& e, const std::vector<Eigen::Index>& labels,
                        const std::vector<Eigen::Index>& dims) {
  Tessellation tess;
  tess.cluster_count = static_cast<Eigen::Index>(dims.size());
  tess.labels = labels;
  tess.centroids = update_centroids(e, labels, dims);
  tess.stride = 1;
  return tgcvt_energy(e, tess);
}

}  // namespace

TEST_CASE("modified distance: hand-computed projection arithmetic") {
  const auto grid = SpatialGrid::uniform(3);  // weights 1/4, 1/2, 1/4
  Eigen::MatrixXd phi(3, 1);
  phi.col(0) << 2, 0, 0;  // unit norm: 1/4 * 4 = 1
  const auto basis = hand_basis(grid, phi);

  Trajectory traj;
  traj.input.strength = Eigen::VectorXd::Zero(4);
  traj.snaps.resize(3, 3);
  traj.snaps.col(0) << 2, 0, 0;  // in span: residual 0
  traj.snaps.col(1) << 0, 2, 0;  // orthogonal: <u,u> = 2
  traj.snaps.col(2) << 2, 2, 0;  // <u,u> = 3, <u,phi> = 1 -> residual 2
  CHECK(modified_distance_sq(traj, basis) == 4.0);

  // Orthogonal trajectory: full squared norm, i.e. trajectory_sq_norm / dt.
  Trajectory ortho;
  ortho.input.strength = Eigen::VectorXd::Zero(4);
  ortho.snaps.resize(3, 3);
  ortho.snaps.setZero();
  ortho.snaps.row(1).setConstant(1.0);
  const TimeGrid time{0.5, 3};
  CHECK(modified_distance_sq(ortho, basis) ==
        doctest::Approx(trajectory_sq_norm(ortho, grid, time) / time.dt)
            .epsilon(1e-14));

  // Every snapshot inside the span: zero within clamping.
  Trajectory inside;
  inside.input.strength = Eigen::VectorXd::Zero(4);
  inside.snaps.resize(3, 3);
  for (Eigen::Index j = 0; j < 3; ++j)
    inside.snaps.col(j) = (0.5 + static_cast<double>(j)) * phi.col(0);
  CHECK(modified_distance_sq(inside, basis) <= 1e-10);
}

TEST_CASE("modified distance honors a snapshot stride") {
  const auto e = two_families();
  const auto& traj = e.trajectories[0];
  const auto basis =
      pod_basis(stack_snapshots(e, {3, 4, 5}), e.grid, 1);

  double manual = 0.0;
  for (Eigen::Index j = 1; j < traj.snaps.cols(); j += 2) {
    const Eigen::VectorXd u = traj.snaps.col(j);
    const Eigen::VectorXd residual = u - project(u, basis);
    manual += inner_product(residual, residual, e.grid);
  }
  CHECK(modified_distance_sq(traj, basis, 2) ==
        doctest::Approx(manual).epsilon(1e-12));
  CHECK_THROWS_AS(modified_distance_sq(traj, basis, 0), Error);
}

TEST_CASE("assign: argmin labels and uniform tie-breaking") {
  const auto e = two_families();

  // One centroid: everything labeled 0.
  const auto pod_all = pod_basis(stack_snapshots(e, {0, 1, 2, 3, 4, 5}), e.grid, 1);
  RandomStream rng(1);
  auto labels = assign(e, {pod_all}, rng);
  for (Eigen::Index l : labels) CHECK(l == 0);

  // Family bases: each trajectory prefers its own family's subspace.
  const auto basis_a = pod_basis(stack_snapshots(e, {0, 1, 2}), e.grid, 2);
  const auto basis_b = pod_basis(stack_snapshots(e, {3, 4, 5}), e.grid, 2);
  labels = assign(e, {basis_a, basis_b}, rng);
  CHECK(labels == std::vector<Eigen::Index>{0, 0, 0, 1, 1, 1});

  // Identical centroids tie on every trajectory; labels ~ Bernoulli(1/2).
  int zeros = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RandomStream tie_rng(seed);
    const auto tied = assign(e, {basis_a, basis_a}, tie_rng);
    if (tied[0] == 0) ++zeros;
  }
  CHECK(zeros > 500 - 48);  // 3 sigma of Binomial(1000, 1/2)
  CHECK(zeros < 500 + 48);
}

TEST_CASE("update_centroids equals per-cluster POD run separately") {
  const auto e = two_families();
  const std::vector<Eigen::Index> labels{0, 0, 0, 1, 1, 1};
  const auto centroids = update_centroids(e, labels, {2, 1});

  const auto oracle_a = pod_basis(stack_snapshots(e, {0, 1, 2}), e.grid, 2);
  const auto oracle_b = pod_basis(stack_snapshots(e, {3, 4, 5}), e.grid, 1);
  CHECK(centroids[0].modes == oracle_a.modes);
  CHECK(centroids[0].eigvals == oracle_a.eigvals);
  CHECK(centroids[1].modes == oracle_b.modes);
  CHECK(centroids[1].eigvals == oracle_b.eigvals);

  // K = 1 is the plain ensemble POD.
  const auto single = update_centroids(e, {0, 0, 0, 0, 0, 0}, {3});
  const auto oracle_all =
      pod_basis(stack_snapshots(e, {0, 1, 2, 3, 4, 5}), e.grid, 3);
  CHECK(single[0].modes == oracle_all.modes);

  // Empty cluster is an error at this level (the Lloyd driver re-seeds).
  CHECK_THROWS_AS(update_centroids(e, labels, {2, 1, 1}), Error);
}

TEST_CASE("lloyd recovers the two families and the exhaustive optimum") {
  const auto e = two_families();
  LloydOptions options;
  options.dims = {1, 1};
  options.max_iter = 50;
  options.restarts = 10;
  const auto tess = lloyd_tgcvt(e, 2, options, 2024);

  CHECK(tess.converged);
  CHECK(tess.populations[0] + tess.populations[1] == 6);

  // Family membership: trajectories 0-2 share a label, 3-5 the other.
  CHECK(tess.labels[0] == tess.labels[1]);
  CHECK(tess.labels[1] == tess.labels[2]);
  CHECK(tess.labels[3] == tess.labels[4]);
  CHECK(tess.labels[4] == tess.labels[5]);
  CHECK(tess.labels[0] != tess.labels[3]);

  // Exhaustive search over all 2-partitions with both sides nonempty.
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < 63; ++mask) {
    std::vector<Eigen::Index> labels(6);
    for (int i = 0; i < 6; ++i) labels[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    best = std::min(best, partition_energy(e, labels, {1, 1}));
  }
  CHECK(tess.energy == best);
}

TEST_CASE("lloyd energy history is non-increasing and the fixpoint is stable") {
  const auto e = two_families();
  LloydOptions options;
  options.dims = {2, 2};
  options.max_iter = 50;
  options.restarts = 3;
  const auto tess = lloyd_tgcvt(e, 2, options, 99);
  CHECK(tess.converged);

  for (std::size_t i = 1; i < tess.energy_history.size(); ++i)
    CHECK(tess.energy_history[i] <=
          tess.energy_history[i - 1] * (1.0 + 1e-12) + 1e-15);

  // Voronoi optimality: with converged centroids, no trajectory is closer
  // to another centroid than to its own.
  for (Eigen::Index i = 0; i < e.sample_count(); ++i) {
    const auto& traj = e.trajectories[static_cast<std::size_t>(i)];
    const double own = modified_distance_sq(
        traj, tess.centroids[static_cast<std::size_t>(tess.labels[static_cast<std::size_t>(i)])]);
    for (const auto& other : tess.centroids)
      CHECK(modified_distance_sq(traj, other) >= own * (1.0 - 1e-12));
  }

  // Centroid optimality: no random orthonormal basis of the same dimension
  // beats a converged centroid on its own cluster.
  RandomStream rng(5);
  for (std::size_t k = 0; k < 2; ++k) {
    double own_term = 0.0;
    std::vector<const Trajectory*> members;
    for (std::size_t i = 0; i < tess.labels.size(); ++i)
      if (tess.labels[i] == static_cast<Eigen::Index>(k)) {
        members.push_back(&e.trajectories[i]);
        own_term += modified_distance_sq(e.trajectories[i], tess.centroids[k]);
      }
    for (int trial = 0; trial < 100; ++trial) {
      // Random basis, orthonormalized in the weighted inner product.
      Eigen::MatrixXd q(9, 2);
      for (Eigen::Index c = 0; c < 2; ++c) {
        Eigen::VectorXd v(9);
        for (Eigen::Index a = 0; a < 9; ++a) v(a) = rng.normal();
        for (Eigen::Index p = 0; p < c; ++p)
          v -= inner_product(v, q.col(p), e.grid) * q.col(p);
        q.col(c) = v / std::sqrt(inner_product(v, v, e.grid));
      }
      const auto random_basis = hand_basis(e.grid, q);
      double random_term = 0.0;
      for (const Trajectory* traj : members)
        random_term += modified_distance_sq(*traj, random_basis);
      CHECK(random_term >= own_term * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("K = 1 lloyd equals plain POD of the ensemble") {
  const auto e = two_families();
  LloydOptions options;
  options.dims = {2};
  options.max_iter = 50;
  options.restarts = 2;
  const auto tess = lloyd_tgcvt(e, 1, options, 0);
  CHECK(tess.converged);
  CHECK(tess.iterations <= 2);

  const auto oracle = pod_basis(stack_snapshots(e, {0, 1, 2, 3, 4, 5}), e.grid, 2);
  // Subspace agreement: residual of each lloyd mode against the POD basis.
  for (Eigen::Index c = 0; c < 2; ++c) {
    const Eigen::VectorXd residual =
        tess.centroids[0].modes.col(c) -
        project(tess.centroids[0].modes.col(c), oracle);
    CHECK(std::sqrt(inner_product(residual, residual, e.grid)) <= 1e-8);
  }

  // K = 1 energy is the spectral tail: (nJ) * sum_{j > d} sigma_j, with
  // nJ = 6 * 3 = 18 snapshots behind the correlation average.
  const double tail = oracle.eigvals.tail(oracle.eigvals.size() - 2).sum();
  CHECK(tess.energy == doctest::Approx(18.0 * tail).epsilon(1e-8));
}

TEST_CASE("degenerate duplicate ensemble terminates with zero energy") {
  Ensemble e;
  e.grid = SpatialGrid::uniform(5);
  e.time = TimeGrid{0.5, 2};
  Trajectory traj;
  traj.input.strength = Eigen::VectorXd::Zero(3);
  traj.snaps.resize(5, 2);
  traj.snaps.col(0) << 0, 1, 2, 1, 0;
  traj.snaps.col(1) << 0, 2, 4, 2, 0;
  for (int i = 0; i < 4; ++i) e.trajectories.push_back(traj);

  LloydOptions options;
  options.dims = {1, 1};
  options.max_iter = 30;
  options.restarts = 2;
  const auto tess = lloyd_tgcvt(e, 2, options, 7);
  CHECK(tess.energy <= 1e-12);
  CHECK(tess.populations[0] + tess.populations[1] == 4);
  CHECK(tess.populations[0] >= 1);
  CHECK(tess.populations[1] >= 1);
  for (Eigen::Index l : tess.labels) CHECK((l == 0 || l == 1));
}

TEST_CASE("cluster energy ratios") {
  const auto grid = SpatialGrid::uniform(3);
  Eigen::MatrixXd phi(3, 1);
  phi.col(0) << 2, 0, 0;
  auto basis = hand_basis(grid, phi);
  basis.eigvals.resize(2);
  basis.eigvals << 3, 1;
  CHECK(cluster_energy_ratios({basis}, {1})(0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(cluster_energy_ratios({basis}, {2})(0) == doctest::Approx(1.0).epsilon(1e-15));

  auto dead = basis;
  dead.eigvals.setZero();
  CHECK_THROWS_AS(cluster_energy_ratios({dead}, {1}), Error);
}

TEST_CASE("tgcvt invariants: populations, labels, recomputable energy") {
  const auto e = two_families();
  LloydOptions options;
  options.dims = {1, 1};
  options.max_iter = 50;
  options.restarts = 5;
  const auto tess = lloyd_tgcvt(e, 2, options, 31);

  Eigen::Index total = 0;
  for (Eigen::Index p : tess.populations) total += p;
  CHECK(total == e.sample_count());
  CHECK(tgcvt_energy(e, tess) == tess.energy);

  Tessellation wrong = tess;
  wrong.labels.pop_back();
  CHECK_THROWS_AS(tgcvt_energy(e, wrong), Error);
}

TEST_CASE("classic_cvt toy optima") {
  Eigen::MatrixXd pair(1, 2);
  pair << 0, 10;
  const auto two = classic_cvt(pair, 2, 20, 1);
  CHECK(two.energy == 0.0);
  CHECK(std::min(two.generators(0, 0), two.generators(0, 1)) == 0.0);
  CHECK(std::max(two.generators(0, 0), two.generators(0, 1)) == 10.0);

  Eigen::MatrixXd quad(1, 4);
  quad << 0, 1, 9, 10;
  const auto res = classic_cvt(quad, 2, 50, 3, 5);
  const double lo = std::min(res.generators(0, 0), res.generators(0, 1));
  const double hi = std::max(res.generators(0, 0), res.generators(0, 1));
  CHECK(lo == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(hi == doctest::Approx(9.5).epsilon(1e-14));
  CHECK(res.energy == doctest::Approx(1.0).epsilon(1e-14));

  const auto mean_only = classic_cvt(quad, 1, 20, 5);
  CHECK(mean_only.generators(0, 0) == doctest::Approx(5.0).epsilon(1e-14));

  CHECK_THROWS_AS(classic_cvt(quad, 5, 20, 1), Error);
}

TEST_CASE("classic_cvt matches the exhaustive optimum on 12 scalar points") {
  Eigen::MatrixXd pts(1, 12);
  pts << 0.0, 0.3, 1.1, 2.0, 2.2, 3.7, 6.0, 6.1, 7.5, 8.2, 9.9, 10.0;
  const auto res = classic_cvt(pts, 2, 100, 17, 10);

  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << 12) - 1; ++mask) {
    double sum[2] = {0, 0};
    int count[2] = {0, 0};
    for (int i = 0; i < 12; ++i) {
      const int c = (mask >> i) & 1;
      sum[c] += pts(0, i);
      ++count[c];
    }
    if (count[0] == 0 || count[1] == 0) continue;
    const double mean0 = sum[0] / count[0], mean1 = sum[1] / count[1];
    double energy = 0.0;
    for (int i = 0; i < 12; ++i) {
      const double m = ((mask >> i) & 1) ? mean1 : mean0;
      energy += (pts(0, i) - m) * (pts(0, i) - m);
    }
    best = std::min(best, energy);
  }
  CHECK(res.energy == doctest::Approx(best).epsilon(1e-12));
}
