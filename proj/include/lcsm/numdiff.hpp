#pragma once

// Central finite differences.

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace lcsm::numdiff {

/// Default gradient step: max(1e-6, 1e-7 |x|), multiplied by `scale`.
inline double gradient_step(double x, double scale = 1.0) {
  return scale * std::max(1e-6, 1e-7 * std::abs(x));
}

template <typename F>
Eigen::VectorXd central_gradient(F&& f, const Eigen::VectorXd& x, double scale = 1.0) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = gradient_step(x(i), scale);
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Hessian from function values only; `f0` is f(x).
template <typename F>
Eigen::MatrixXd central_hessian(F&& f, const Eigen::VectorXd& x, double f0) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h(i) = std::max(1e-4, 1e-4 * std::abs(x(i)));
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp(i) = x(i) + h(i);
    const double fp = f(xp);
    xp(i) = x(i) - h(i);
    const double fm = f(xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      xp(i) = x(i) + h(i);
      xp(j) = x(j) + h(j);
      const double fpp = f(xp);
      xp(j) = x(j) - h(j);
      const double fpm = f(xp);
      xp(i) = x(i) - h(i);
      const double fmm = f(xp);
      xp(j) = x(j) + h(j);
      const double fmp = f(xp);
      xp(i) = x(i);
      xp(j) = x(j);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

/// Jacobian of a vector-valued map.
template <typename F>
Eigen::MatrixXd central_jacobian(F&& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd xp = x;
  Eigen::MatrixXd jac;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x(i)));
    xp(i) = x(i) + h;
    const Eigen::VectorXd fp = f(xp);
    xp(i) = x(i) - h;
    const Eigen::VectorXd fm = f(xp);
    xp(i) = x(i);
    if (i == 0) jac.resize(fp.size(), x.size());
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

}  // namespace lcsm::numdiff
