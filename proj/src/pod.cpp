#include "cpod/pod.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "cpod/error.hpp"

namespace cpod {

namespace {

constexpr double kRankCutoff = 1e-12;  // relative to the leading eigenvalue

// Flip each column so its largest-magnitude entry is positive; pins the
// arbitrary eigenvector sign for reproducibility.
void pin_signs(Eigen::MatrixXd& modes) {
  for (Eigen::Index c = 0; c < modes.cols(); ++c) {
    Eigen::Index at = 0;
    modes.col(c).cwiseAbs().maxCoeff(&at);
    if (modes(at, c) < 0.0) modes.col(c) = -modes.col(c);
  }
}

// Clamp the tiny negatives a PSD eigensolve may produce; anything clearly
// negative means the input was not a correlation matrix.
void clamp_spectrum(Eigen::VectorXd& vals) {
  const double top = vals.size() > 0 ? vals(0) : 0.0;
  const double floor = -kRankCutoff * std::max(top, 0.0);
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < floor)
      throw Error("domain", "correlation spectrum has a significant negative eigenvalue");
    if (vals(i) < 0.0) vals(i) = 0.0;
  }
}

}  // namespace

void PodBasis::validate() const {
  grid.validate();
  if (modes.rows() != grid.size())
    throw Error("dimension", "mode length disagrees with grid");
  if (modes.cols() != dim) throw Error("dimension", "mode count disagrees with dim");
  if (dim > 0) {
    const Eigen::MatrixXd gram =
        modes.transpose() * grid.weights.asDiagonal() * modes;
    const double err =
        (gram - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff();
    if (err > 1e-10)
      throw Error("domain", "basis is not orthonormal in the grid inner product");
  }
  for (Eigen::Index i = 0; i + 1 < eigvals.size(); ++i)
    if (eigvals(i) < eigvals(i + 1))
      throw Error("domain", "spectrum must be descending");
  if (eigvals.size() > 0 && eigvals(eigvals.size() - 1) < 0.0)
    throw Error("domain", "spectrum must be nonnegative");
}

Eigen::MatrixXd correlation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& snaps,
                                   const SpatialGrid& grid) {
  if (snaps.rows() != grid.size())
    throw Error("dimension", "snapshot length disagrees with grid");
  const Eigen::Index n = snaps.cols();
  if (n < 1) throw Error("domain", "need at least one snapshot");
  Eigen::MatrixXd r =
      snaps.transpose() * grid.weights.asDiagonal() * snaps / static_cast<double>(n);
  r = 0.5 * (r + r.transpose().eval());  // kill roundoff asymmetry
  return r;
}

SymEig sym_eig(const Eigen::Ref<const Eigen::MatrixXd>& matrix) {
  if (matrix.rows() != matrix.cols())
    throw Error("dimension", "sym_eig needs a square matrix");
  const double scale = matrix.cwiseAbs().maxCoeff();
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(scale, 1.0))
    throw Error("domain", "sym_eig input is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix);
  if (solver.info() != Eigen::Success)
    throw Error("domain", "symmetric eigendecomposition failed to converge");

  const Eigen::Index n = matrix.rows();
  SymEig out;
  out.values = solver.eigenvalues().reverse();
  out.vectors.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c)
    out.vectors.col(c) = solver.eigenvectors().col(n - 1 - c);
  return out;
}

PodBasis pod_basis(const Eigen::Ref<const Eigen::MatrixXd>& snaps,
                   const SpatialGrid& grid, Eigen::Index dim) {
  if (snaps.rows() != grid.size())
    throw Error("dimension", "snapshot length disagrees with grid");
  const Eigen::Index n = snaps.cols();
  const Eigen::Index m = snaps.rows();
  if (n < 1) throw Error("domain", "need at least one snapshot");
  if (dim < 0 || dim > n) throw Error("rank", "requested dimension out of range");

  PodBasis basis;
  basis.grid = grid;
  basis.dim = dim;

  if (n <= m) {
    // Method of snapshots: N x N correlation problem.
    const Eigen::MatrixXd r = correlation_matrix(snaps, grid);
    SymEig eig = sym_eig(r);
    clamp_spectrum(eig.values);
    basis.eigvals = eig.values;
    if (dim > 0 && !(basis.eigvals(dim - 1) > kRankCutoff * basis.eigvals(0)))
      throw Error("rank", "requested dimension exceeds the numerical rank");
    basis.modes.resize(m, dim);
    for (Eigen::Index c = 0; c < dim; ++c)
      basis.modes.col(c) = snaps * eig.vectors.col(c) /
                           std::sqrt(static_cast<double>(n) * basis.eigvals(c));
  } else {
    // Equivalent M x M weighted spatial covariance problem: with
    // B = W^(1/2) V, the matrices B^T B / N and B B^T / N share their
    // nonzero spectrum, and modes are W^(-1/2) times unit eigenvectors.
    const Eigen::VectorXd root_w = grid.weights.cwiseSqrt();
    const Eigen::MatrixXd b = root_w.asDiagonal() * snaps;
    Eigen::MatrixXd cov =
        b * b.transpose() / static_cast<double>(n);
    cov = 0.5 * (cov + cov.transpose().eval());
    SymEig eig = sym_eig(cov);
    clamp_spectrum(eig.values);
    basis.eigvals.setZero(n);
    basis.eigvals.head(m) = eig.values;
    if (dim > 0 && !(basis.eigvals(dim - 1) > kRankCutoff * basis.eigvals(0)))
      throw Error("rank", "requested dimension exceeds the numerical rank");
    basis.modes = root_w.cwiseInverse().asDiagonal() * eig.vectors.leftCols(dim);
  }

  pin_signs(basis.modes);
  return basis;
}

double pod_energy(const Eigen::Ref<const Eigen::VectorXd>& eigvals,
                  Eigen::Index dim, double horizon) {
  if (dim < 0 || dim > eigvals.size())
    throw Error("dimension", "dimension outside the spectrum length");
  return horizon * eigvals.tail(eigvals.size() - dim).sum();
}

Eigen::Index select_dimension(const Eigen::Ref<const Eigen::VectorXd>& eigvals,
                              double ratio) {
  if (!(ratio > 0.0) || ratio > 1.0)
    throw Error("config", "energy ratio must lie in (0, 1]");
  const Eigen::Index n = eigvals.size();
  double total = 0.0;
  Eigen::Index positive = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = std::max(eigvals(i), 0.0);
    total += v;
    if (v > 0.0) ++positive;
  }
  if (!(total > 0.0)) throw Error("domain", "spectrum carries no energy");
  if (ratio >= 1.0) return positive;
  double acc = 0.0;
  for (Eigen::Index d = 1; d <= n; ++d) {
    acc += std::max(eigvals(d - 1), 0.0);
    if (acc / total >= ratio) return d;
  }
  return positive;
}

Snapshot project(const Eigen::Ref<const Eigen::VectorXd>& snapshot,
                 const PodBasis& basis) {
  if (snapshot.size() != basis.grid.size())
    throw Error("dimension", "snapshot length disagrees with basis grid");
  if (basis.dim == 0) return Snapshot::Zero(snapshot.size());
  const Eigen::VectorXd coeff =
      basis.modes.transpose() * basis.grid.weights.cwiseProduct(snapshot);
  return basis.modes * coeff;
}

}  // namespace cpod
