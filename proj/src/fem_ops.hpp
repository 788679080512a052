#pragma once

// Internal P1 element operators on the uniform grid, shared by the full
// solver and the reduced-operator assembly. All quadratures are exact for
// piecewise-linear fields.

#include <Eigen/Dense>
#include <cmath>

#include "cpod/error.hpp"

namespace cpod::fem {

// Tridiagonal matrix: sub(i) multiplies x(i-1) in row i, sup(i) multiplies
// x(i+1); sub(0) and sup(M-1) are ignored.
struct Tridiag {
  Eigen::VectorXd sub, diag, sup;

  explicit Tridiag(Eigen::Index m)
      : sub(Eigen::VectorXd::Zero(m)),
        diag(Eigen::VectorXd::Zero(m)),
        sup(Eigen::VectorXd::Zero(m)) {}

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::Index m = diag.size();
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double v = diag(i) * x(i);
      if (i > 0) v += sub(i) * x(i - 1);
      if (i + 1 < m) v += sup(i) * x(i + 1);
      y(i) = v;
    }
    return y;
  }

  // Thomas elimination; the systems here are strongly diagonally dominant.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& rhs) const {
    const Eigen::Index m = diag.size();
    Eigen::VectorXd c(m), d(m);
    double piv = diag(0);
    if (std::abs(piv) < 1e-300)
      throw Error("singular", "zero pivot in tridiagonal solve");
    c(0) = sup(0) / piv;
    d(0) = rhs(0) / piv;
    for (Eigen::Index i = 1; i < m; ++i) {
      piv = diag(i) - sub(i) * c(i - 1);
      if (std::abs(piv) < 1e-300)
        throw Error("singular", "zero pivot in tridiagonal solve");
      c(i) = (i + 1 < m) ? sup(i) / piv : 0.0;
      d(i) = (rhs(i) - sub(i) * d(i - 1)) / piv;
    }
    Eigen::VectorXd x(m);
    x(m - 1) = d(m - 1);
    for (Eigen::Index i = m - 2; i >= 0; --i) x(i) = d(i) - c(i) * x(i + 1);
    return x;
  }
};

// integral of u_x phi_x.
inline Tridiag stiffness(Eigen::Index m, double h) {
  Tridiag k(m);
  for (Eigen::Index e = 0; e + 1 < m; ++e) {
    k.diag(e) += 1.0 / h;
    k.diag(e + 1) += 1.0 / h;
    k.sup(e) -= 1.0 / h;
    k.sub(e + 1) -= 1.0 / h;
  }
  return k;
}

// v -> integral of (v w_x) phi: trial field advected by the slope of w.
inline void add_conv_slope(Tridiag& a, const Eigen::Ref<const Eigen::VectorXd>& w) {
  const Eigen::Index m = w.size();
  for (Eigen::Index e = 0; e + 1 < m; ++e) {
    const double slope6 = (w(e + 1) - w(e)) / 6.0;
    a.diag(e) += 2.0 * slope6;
    a.sup(e) += slope6;
    a.sub(e + 1) += slope6;
    a.diag(e + 1) += 2.0 * slope6;
  }
}

// v -> integral of (w v_x) phi: trial slope transported by the field w.
inline void add_conv_transport(Tridiag& a,
                               const Eigen::Ref<const Eigen::VectorXd>& w) {
  const Eigen::Index m = w.size();
  for (Eigen::Index e = 0; e + 1 < m; ++e) {
    const double wa6 = (2.0 * w(e) + w(e + 1)) / 6.0;
    const double wb6 = (w(e) + 2.0 * w(e + 1)) / 6.0;
    a.diag(e) -= wa6;
    a.sup(e) += wa6;
    a.sub(e + 1) -= wb6;
    a.diag(e + 1) += wb6;
  }
}

// Both halves of the convection linearized about w.
inline void add_conv_linearized(Tridiag& a,
                                const Eigen::Ref<const Eigen::VectorXd>& w) {
  add_conv_slope(a, w);
  add_conv_transport(a, w);
}

// integral of (u u_x) phi, the quadratic term.
inline Eigen::VectorXd convection_rhs(const Eigen::Ref<const Eigen::VectorXd>& u) {
  const Eigen::Index m = u.size();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (Eigen::Index e = 0; e + 1 < m; ++e) {
    const double slope6 = (u(e + 1) - u(e)) / 6.0;
    b(e) += slope6 * (2.0 * u(e) + u(e + 1));
    b(e + 1) += slope6 * (u(e) + 2.0 * u(e + 1));
  }
  return b;
}

}  // namespace cpod::fem
