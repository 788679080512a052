#include "cpod/tgcvt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpod/error.hpp"
#include "cpod/numerics.hpp"

namespace cpod {

namespace {

constexpr double kTieTol = 1e-12;  // relative distance tie tolerance

// Index of the minimum with ties (relative tolerance) broken uniformly.
Eigen::Index argmin_with_ties(const Eigen::Ref<const Eigen::VectorXd>& values,
                              RandomStream& rng) {
  const double best = values.minCoeff();
  const double cut = best + kTieTol * best;
  std::vector<Eigen::Index> tied;
  for (Eigen::Index k = 0; k < values.size(); ++k)
    if (values(k) <= cut) tied.push_back(k);
  if (tied.size() == 1) return tied.front();
  return tied[rng.pick(tied.size())];
}

// Distances of every trajectory to every centroid.
Eigen::MatrixXd distance_table(const Ensemble& ensemble,
                               const std::vector<PodBasis>& centroids,
                               Eigen::Index stride) {
  const Eigen::Index n = ensemble.sample_count();
  const auto k = static_cast<Eigen::Index>(centroids.size());
  Eigen::MatrixXd dist(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < k; ++c)
      dist(i, c) = modified_distance_sq(
          ensemble.trajectories[static_cast<std::size_t>(i)], centroids[static_cast<std::size_t>(c)], stride);
  return dist;
}

std::vector<Eigen::Index> count_members(const std::vector<Eigen::Index>& labels,
                                        Eigen::Index cluster_count) {
  std::vector<Eigen::Index> pop(static_cast<std::size_t>(cluster_count), 0);
  for (Eigen::Index l : labels) ++pop[static_cast<std::size_t>(l)];
  return pop;
}

// Move the worst-fitting trajectory (from a cluster that can spare one) into
// each empty cluster. Returns how many re-seeds happened.
Eigen::Index reseed_empties(const Eigen::MatrixXd& dist,
                            std::vector<Eigen::Index>& labels,
                            Eigen::Index cluster_count) {
  auto pop = count_members(labels, cluster_count);
  Eigen::Index reseeds = 0;
  for (Eigen::Index k = 0; k < cluster_count; ++k) {
    if (pop[static_cast<std::size_t>(k)] > 0) continue;
    Eigen::Index pick = -1;
    double worst = -1.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(labels.size()); ++i) {
      if (pop[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] < 2) continue;
      const double d = dist(i, labels[static_cast<std::size_t>(i)]);
      if (d > worst) {
        worst = d;
        pick = i;
      }
    }
    if (pick < 0)
      throw Error("domain", "cannot re-seed empty cluster: no donor available");
    --pop[static_cast<std::size_t>(labels[static_cast<std::size_t>(pick)])];
    labels[static_cast<std::size_t>(pick)] = k;
    ++pop[static_cast<std::size_t>(k)];
    ++reseeds;
  }
  return reseeds;
}

double direct_energy(const Ensemble& ensemble,
                     const std::vector<Eigen::Index>& labels,
                     const std::vector<PodBasis>& centroids,
                     Eigen::Index stride) {
  std::vector<double> terms(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    terms[i] = modified_distance_sq(ensemble.trajectories[i],
                                    centroids[static_cast<std::size_t>(labels[i])], stride);
  return pairwise_sum(terms);
}

Tessellation lloyd_single(const Ensemble& ensemble, Eigen::Index cluster_count,
                          const LloydOptions& options, std::uint64_t seed) {
  const Eigen::Index n = ensemble.sample_count();
  RandomStream rng(seed);

  Tessellation tess;
  tess.cluster_count = cluster_count;
  tess.stride = options.stride;

  // Balanced random initial partition; every cluster starts nonempty, so all
  // requested dimensions are feasible whenever member snapshots have rank.
  const auto perm = rng.shuffled_indices(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < perm.size(); ++i)
    labels[perm[i]] = static_cast<Eigen::Index>(i) % cluster_count;

  auto centroids = update_centroids(ensemble, labels, options.dims, options.stride);
  tess.energy_history.push_back(
      direct_energy(ensemble, labels, centroids, options.stride));

  for (Eigen::Index it = 1; it <= options.max_iter; ++it) {
    tess.iterations = it;
    const Eigen::MatrixXd dist = distance_table(ensemble, centroids, options.stride);
    std::vector<Eigen::Index> next(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      next[static_cast<std::size_t>(i)] = argmin_with_ties(dist.row(i).transpose(), rng);
    tess.reseed_count += reseed_empties(dist, next, cluster_count);

    if (next == labels) {
      tess.converged = true;
      break;
    }
    labels = std::move(next);
    centroids = update_centroids(ensemble, labels, options.dims, options.stride);
    tess.energy_history.push_back(
        direct_energy(ensemble, labels, centroids, options.stride));
  }

  tess.labels = std::move(labels);
  tess.centroids = std::move(centroids);
  tess.populations = count_members(tess.labels, cluster_count);
  tess.energy = direct_energy(ensemble, tess.labels, tess.centroids, options.stride);
  tess.energy_ratios = cluster_energy_ratios(tess.centroids, options.dims);
  return tess;
}

}  // namespace

double modified_distance_sq(const Trajectory& traj, const PodBasis& basis,
                            Eigen::Index stride) {
  if (stride < 1) throw Error("config", "stride must be >= 1");
  if (traj.snaps.rows() != basis.grid.size())
    throw Error("dimension", "trajectory length disagrees with basis grid");
  const auto& w = basis.grid.weights;
  double acc = 0.0;
  for (Eigen::Index j = stride - 1; j < traj.snaps.cols(); j += stride) {
    const auto u = traj.snaps.col(j);
    const Eigen::VectorXd wu = w.cwiseProduct(u);
    double term = wu.dot(u);
    if (basis.dim > 0) {
      const Eigen::VectorXd coeff = basis.modes.transpose() * wu;
      term -= coeff.squaredNorm();
    }
    acc += std::max(term, 0.0);  // exact-span residuals may round negative
  }
  return acc;
}

std::vector<Eigen::Index> assign(const Ensemble& ensemble,
                                 const std::vector<PodBasis>& centroids,
                                 RandomStream& rng, Eigen::Index stride) {
  if (centroids.empty()) throw Error("config", "assign needs at least one centroid");
  const Eigen::MatrixXd dist = distance_table(ensemble, centroids, stride);
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(ensemble.sample_count()));
  for (Eigen::Index i = 0; i < ensemble.sample_count(); ++i)
    labels[static_cast<std::size_t>(i)] = argmin_with_ties(dist.row(i).transpose(), rng);
  return labels;
}

std::vector<PodBasis> update_centroids(const Ensemble& ensemble,
                                       const std::vector<Eigen::Index>& labels,
                                       const std::vector<Eigen::Index>& dims,
                                       Eigen::Index stride) {
  const auto cluster_count = static_cast<Eigen::Index>(dims.size());
  if (static_cast<Eigen::Index>(labels.size()) != ensemble.sample_count())
    throw Error("dimension", "one label per trajectory required");
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(cluster_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= cluster_count)
      throw Error("domain", "label out of range");
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<PodBasis> centroids;
  centroids.reserve(static_cast<std::size_t>(cluster_count));
  for (Eigen::Index k = 0; k < cluster_count; ++k) {
    if (members[static_cast<std::size_t>(k)].empty())
      throw Error("domain", "cluster " + std::to_string(k) + " is empty");
    const Eigen::MatrixXd snaps =
        stack_snapshots(ensemble, members[static_cast<std::size_t>(k)], stride);
    centroids.push_back(pod_basis(snaps, ensemble.grid, dims[static_cast<std::size_t>(k)]));
  }
  return centroids;
}

Tessellation lloyd_tgcvt(const Ensemble& ensemble, Eigen::Index cluster_count,
                         const LloydOptions& options, std::uint64_t seed) {
  const Eigen::Index n = ensemble.sample_count();
  if (cluster_count < 1) throw Error("config", "need at least one cluster");
  if (cluster_count > n)
    throw Error("config", "more clusters than trajectories");
  if (static_cast<Eigen::Index>(options.dims.size()) != cluster_count)
    throw Error("config", "one dimension per cluster required");
  if (options.max_iter < 1) throw Error("config", "max_iter must be >= 1");
  if (options.restarts < 1) throw Error("config", "restarts must be >= 1");

  Tessellation best;
  bool have = false;
  for (Eigen::Index r = 0; r < options.restarts; ++r) {
    Tessellation tess = lloyd_single(ensemble, cluster_count, options,
                                     derive_seed(seed, "lloyd-restart",
                                                 static_cast<std::uint64_t>(r)));
    tess.restart_index = r;
    if (!have || tess.energy < best.energy) {
      best = std::move(tess);
      have = true;
    }
  }
  return best;
}

double tgcvt_energy(const Ensemble& ensemble, const Tessellation& tess) {
  if (static_cast<Eigen::Index>(tess.labels.size()) != ensemble.sample_count())
    throw Error("dimension", "tessellation does not match ensemble");
  return direct_energy(ensemble, tess.labels, tess.centroids, tess.stride);
}

Eigen::VectorXd cluster_energy_ratios(const std::vector<PodBasis>& centroids,
                                      const std::vector<Eigen::Index>& dims) {
  if (centroids.size() != dims.size())
    throw Error("dimension", "one dimension per centroid required");
  Eigen::VectorXd ratios(static_cast<Eigen::Index>(centroids.size()));
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    const auto& vals = centroids[k].eigvals;
    const double total = vals.sum();
    if (!(total > 0.0))
      throw Error("domain", "cluster spectrum carries no energy");
    ratios(static_cast<Eigen::Index>(k)) = vals.head(dims[k]).sum() / total;
  }
  return ratios;
}

CvtResult classic_cvt(const Eigen::Ref<const Eigen::MatrixXd>& points,
                      Eigen::Index cluster_count, Eigen::Index max_iter,
                      std::uint64_t seed, Eigen::Index restarts) {
  const Eigen::Index n = points.cols();
  if (cluster_count < 1 || cluster_count > n)
    throw Error("config", "cluster count must lie in [1, point count]");
  if (max_iter < 1 || restarts < 1)
    throw Error("config", "max_iter and restarts must be >= 1");

  CvtResult best;
  bool have = false;
  for (Eigen::Index r = 0; r < restarts; ++r) {
    RandomStream rng(derive_seed(seed, "cvt-restart", static_cast<std::uint64_t>(r)));
    const auto perm = rng.shuffled_indices(static_cast<std::size_t>(n));
    Eigen::MatrixXd gen(points.rows(), cluster_count);
    for (Eigen::Index k = 0; k < cluster_count; ++k)
      gen.col(k) = points.col(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(k)]));

    CvtResult res;
    std::vector<Eigen::Index> labels(static_cast<std::size_t>(n), -1);
    for (Eigen::Index it = 1; it <= max_iter; ++it) {
      res.iterations = it;
      Eigen::MatrixXd dist(n, cluster_count);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < cluster_count; ++k)
          dist(i, k) = (points.col(i) - gen.col(k)).squaredNorm();
      std::vector<Eigen::Index> next(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i)
        next[static_cast<std::size_t>(i)] = argmin_with_ties(dist.row(i).transpose(), rng);
      reseed_empties(dist, next, cluster_count);
      if (next == labels) {
        res.converged = true;
        break;
      }
      labels = std::move(next);
      for (Eigen::Index k = 0; k < cluster_count; ++k) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(points.rows());
        Eigen::Index count = 0;
        for (Eigen::Index i = 0; i < n; ++i)
          if (labels[static_cast<std::size_t>(i)] == k) {
            mean += points.col(i);
            ++count;
          }
        gen.col(k) = mean / static_cast<double>(count);
      }
    }
    res.labels = std::move(labels);
    res.generators = std::move(gen);
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      terms[static_cast<std::size_t>(i)] =
          (points.col(i) - res.generators.col(res.labels[static_cast<std::size_t>(i)]))
              .squaredNorm();
    res.energy = pairwise_sum(terms);
    if (!have || res.energy < best.energy) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

}  // namespace cpod
