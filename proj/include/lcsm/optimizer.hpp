#pragma once

// BFGS minimizer with a strong Wolfe line search. Objective values of +inf
// (or NaN) mark infeasible points and are treated as a failed sufficient
// decrease test.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace lcsm {

struct OptimizerOptions {
  double gradient_tol = 1e-8;  // stop when |g| <= gradient_tol * (1 + |f|)
  int max_iters = 2000;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

namespace detail {

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd g;
};

inline double interpolate(const LinePoint& lo, const LinePoint& hi) {
  // Minimizer of the quadratic through (lo.f, lo.slope) and hi.f, kept
  // inside the middle 80% of the bracket.
  const double d = hi.alpha - lo.alpha;
  double a = lo.alpha + d / 2;
  if (std::isfinite(hi.f)) {
    const double denom = 2.0 * (hi.f - lo.f - lo.slope * d);
    if (denom > 0) a = lo.alpha - lo.slope * d * d / denom;
  }
  const double left = std::min(lo.alpha, hi.alpha), right = std::max(lo.alpha, hi.alpha);
  const double margin = 0.1 * (right - left);
  return std::clamp(a, left + margin, right - margin);
}

}  // namespace detail

template <typename F, typename G>
OptimizerResult minimize_bfgs(F&& f, G&& gradient, Eigen::VectorXd x0,
                              const OptimizerOptions& options = {}) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  const Eigen::Index n = x0.size();
  OptimizerResult res;
  res.x = std::move(x0);
  res.f = f(res.x);
  if (!std::isfinite(res.f)) {
    res.message = "objective is not finite at the starting point";
    return res;
  }
  res.grad = gradient(res.x);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;  // H has not been updated yet

  auto done = [&] { return res.grad.norm() <= options.gradient_tol * (1.0 + std::abs(res.f)); };

  for (res.iterations = 0; res.iterations < options.max_iters; ++res.iterations) {
    if (!res.grad.allFinite()) {
      res.message = "gradient is not finite";
      return res;
    }
    if (done()) {
      res.converged = true;
      res.message = "gradient tolerance met";
      return res;
    }
    Eigen::VectorXd p = -H * res.grad;
    double slope0 = res.grad.dot(p);
    if (!(slope0 < 0)) {
      H.setIdentity();
      fresh = true;
      p = -res.grad;
      slope0 = res.grad.dot(p);
    }
    double alpha = fresh ? std::min(1.0, 1.0 / p.cwiseAbs().maxCoeff()) : 1.0;

    // Strong Wolfe line search (bracketing then zoom).
    detail::LinePoint origin{0.0, res.f, slope0, res.grad};
    detail::LinePoint prev = origin;
    detail::LinePoint accepted;
    bool found = false;
    auto eval = [&](double a, bool need_grad) {
      detail::LinePoint pt;
      pt.alpha = a;
      const Eigen::VectorXd xt = res.x + a * p;
      pt.f = f(xt);
      if (!std::isfinite(pt.f)) pt.f = std::numeric_limits<double>::infinity();
      if (need_grad && std::isfinite(pt.f)) {
        pt.g = gradient(xt);
        pt.slope = pt.g.dot(p);
      }
      return pt;
    };
    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
      for (int it = 0; it < 30; ++it) {
        const double a = detail::interpolate(lo, hi);
        detail::LinePoint pt = eval(a, false);
        if (!(pt.f <= res.f + c1 * a * slope0) || pt.f >= lo.f) {
          hi = pt;
          continue;
        }
        pt = eval(a, true);
        if (std::abs(pt.slope) <= -c2 * slope0) {
          accepted = pt;
          return true;
        }
        if (pt.slope * (hi.alpha - lo.alpha) >= 0) hi = lo;
        lo = pt;
      }
      // Accept the best sufficient-decrease point if it exists.
      if (lo.alpha > 0) {
        accepted = lo;
        return true;
      }
      return false;
    };
    for (int it = 0; it < 40; ++it) {
      detail::LinePoint pt = eval(alpha, false);
      if (!(pt.f <= res.f + c1 * alpha * slope0) || (it > 0 && pt.f >= prev.f)) {
        found = zoom(prev, pt);
        break;
      }
      pt = eval(alpha, true);
      if (std::abs(pt.slope) <= -c2 * slope0) {
        accepted = pt;
        found = true;
        break;
      }
      if (pt.slope >= 0) {
        found = zoom(pt, prev);
        break;
      }
      prev = pt;
      alpha *= 2.0;
    }

    if (!found || !(accepted.f <= res.f)) {
      if (!fresh) {
        H.setIdentity();
        fresh = true;
        continue;
      }
      res.message = "line search failed";
      return res;
    }

    const Eigen::VectorXd s = accepted.alpha * p;
    const Eigen::VectorXd y = accepted.g - res.grad;
    res.x += s;
    res.f = accepted.f;
    res.grad = accepted.g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
      fresh = false;
    }
  }
  res.converged = done();
  res.message = res.converged ? "gradient tolerance met" : "iteration limit reached";
  return res;
}

}  // namespace lcsm
