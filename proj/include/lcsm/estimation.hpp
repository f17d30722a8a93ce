#pragma once

// Maximum-likelihood fitting: starting values, quasi-Newton optimization in
// the unconstrained parameterization, jittered restarts, observed-information
// standard errors, Wald tests and information criteria.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcsm/likelihood.hpp"
#include "lcsm/numdiff.hpp"
#include "lcsm/optimizer.hpp"
#include "lcsm/parameterization.hpp"
#include "lcsm/random.hpp"

namespace lcsm {

struct FitConfig {
  int max_retries = 10;  // total optimization attempts, the first from the start values
  double optimizer_tol = 1e-8;
  int max_iters = 2000;
  double jitter_scale = 0.3;
  std::uint64_t seed = 0;
  int workers = default_workers();
};

enum class FitStatus { Converged, RetriesExhausted, Failed };

inline std::string_view status_name(FitStatus s) {
  switch (s) {
    case FitStatus::Converged: return "Converged";
    case FitStatus::RetriesExhausted: return "RetriesExhausted";
    case FitStatus::Failed: return "Failed";
  }
  return "?";
}

inline std::optional<FitStatus> parse_status(std::string_view s) {
  if (s == "Converged") return FitStatus::Converged;
  if (s == "RetriesExhausted") return FitStatus::RetriesExhausted;
  if (s == "Failed") return FitStatus::Failed;
  return std::nullopt;
}

struct FitResult {
  ParameterSet params;             // natural scale
  std::vector<std::string> names;  // free parameters, natural scale
  Eigen::VectorXd estimates;       // free parameters in `names` order
  Eigen::VectorXd se;
  Eigen::VectorXd wald_p;
  Eigen::MatrixXd cov;  // sampling covariance of `estimates`
  double minus2ll = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  int n_free = 0;
  int n = 0;
  FitStatus status = FitStatus::Failed;
  int n_retries_used = 0;
  int iterations = 0;
  double gradient_norm = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

struct InformationCriteria {
  double aic;
  double bic;
};

inline InformationCriteria information_criteria(double minus2ll, int n_free, int n) {
  if (n < 1) throw ModelError("information criteria need n >= 1");
  return {minus2ll + 2.0 * n_free, minus2ll + n_free * std::log(static_cast<double>(n))};
}

namespace detail {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  int count = 0;
};

inline Moments moments(const std::vector<double>& v) {
  Moments m;
  m.count = static_cast<int>(v.size());
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= m.count;
  if (m.count > 1) {
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= (m.count - 1);
  }
  return m;
}

inline double half_var_or_unit(const Moments& m) {
  return (m.count > 1 && std::isfinite(m.var) && m.var > 0) ? m.var / 2.0 : 1.0;
}

inline double mean_or(const Moments& m, double fallback) {
  return (m.count > 0 && std::isfinite(m.mean)) ? m.mean : fallback;
}

}  // namespace detail

/// Data-driven starting values: intercept moments from the first wave, slope
/// terms from per-individual secants (nonparametric) or per-individual OLS on
/// the closed-form curve basis (parametric, with b = 0.5 and c = -0.5), the
/// quadratic curvature mean from the pooled trajectory, a diagonal growth
/// covariance at half the sample variances and the residual variance at half
/// the first-wave variance.
inline ParameterSet default_start(const FunctionalForm& form, const LongitudinalSample& sample) {
  if (sample.empty()) throw ModelError("sample is empty");
  const int k = form.factor_count();
  const int J = sample.waves();
  ParameterSet p;
  p.growth_means = Eigen::VectorXd::Zero(k);
  p.growth_cov = Eigen::MatrixXd::Zero(k, k);

  std::vector<double> first;
  for (const auto& ind : sample.individuals())
    if (ind.observed.front() == 0) first.push_back(ind.y(0));
  const auto m0 = detail::moments(first);
  p.growth_means(0) = detail::mean_or(m0, 0.0);
  p.growth_cov(0, 0) = detail::half_var_or_unit(m0);
  p.residual_var = detail::half_var_or_unit(m0);

  if (form.kind() == Kind::Nonparametric) {
    std::vector<double> secants;
    for (const auto& ind : sample.individuals())
      if (ind.observed.size() >= 2 && ind.observed[0] == 0 && ind.observed[1] == 1)
        secants.push_back((ind.y(1) - ind.y(0)) / ind.schedule.lengths()(0));
    const auto ms = detail::moments(secants);
    p.growth_means(1) = detail::mean_or(ms, 1.0);
    p.growth_cov(1, 1) = detail::half_var_or_unit(ms);
    p.gamma = Eigen::VectorXd::Ones(J - 1);
    return p;
  }

  if (form.kind() == Kind::NegativeExponential) p.b = 0.5;
  if (form.kind() == Kind::JenssBayley) p.c = -0.5;

  // Per-individual OLS on the closed-form basis.
  std::vector<std::vector<double>> coef(k);
  std::vector<double> line_slope_adjusted;
  double pooled_curvature = 0.0;
  if (form.kind() == Kind::Quadratic) {
    const auto n_obs = static_cast<Eigen::Index>(sample.observation_count());
    Eigen::MatrixXd X(n_obs, 3);
    Eigen::VectorXd Y(n_obs);
    Eigen::Index row = 0;
    for (const auto& ind : sample.individuals())
      for (std::size_t m = 0; m < ind.observed.size(); ++m, ++row) {
        const double t = ind.schedule.times()(ind.observed[m]);
        X.row(row) << 1.0, t, t * t;
        Y(row) = ind.y(static_cast<Eigen::Index>(m));
      }
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
    if (beta.allFinite()) pooled_curvature = beta(2);
  }
  for (const auto& ind : sample.individuals()) {
    const auto jo = static_cast<Eigen::Index>(ind.observed.size());
    Eigen::VectorXd t(jo);
    for (Eigen::Index m = 0; m < jo; ++m) t(m) = ind.schedule.times()(ind.observed[m]);
    if (form.kind() == Kind::Quadratic) {
      Eigen::MatrixXd X(jo, 2);
      X.col(0).setOnes();
      X.col(1) = t;
      const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(ind.y);
      if (beta.allFinite()) {
        coef[1].push_back(beta(1));
        line_slope_adjusted.push_back(beta(1) - 2.0 * pooled_curvature * t.mean());
      }
    }
    if (jo < k) continue;
    Eigen::MatrixXd X(jo, k);
    for (Eigen::Index m = 0; m < jo; ++m) X.row(m) = growth_row(form.kind(), p, t(m));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < k) continue;
    const Eigen::VectorXd beta = qr.solve(ind.y);
    if (!beta.allFinite()) continue;
    for (int c = 1; c < k; ++c)
      if (!(form.kind() == Kind::Quadratic && c == 1)) coef[c].push_back(beta(c));
  }
  for (int c = 1; c < k; ++c) {
    const auto mc = detail::moments(coef[c]);
    p.growth_means(c) = detail::mean_or(mc, 1.0);
    p.growth_cov(c, c) = detail::half_var_or_unit(mc);
  }
  if (form.kind() == Kind::Quadratic) {
    p.growth_means(1) = detail::mean_or(detail::moments(line_slope_adjusted), 1.0);
    p.growth_means(2) = pooled_curvature;
  }
  if (form.kind() == Kind::JenssBayley && !(p.growth_means(2) < 0 || p.growth_means(2) > 0))
    p.growth_means(2) = -1.0;
  return p;
}

namespace detail {

/// -loglik, +inf where the likelihood cannot be evaluated.
struct Objective {
  const FunctionalForm& form;
  const Parameterization& par;
  const LongitudinalSample& sample;
  int workers;

  double operator()(const Eigen::VectorXd& x) const {
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
    try {
      const double ll = loglik(form, par.to_natural(x), sample, workers);
      return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    } catch (const SingularCovarianceError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const ModelError&) {
      return std::numeric_limits<double>::infinity();
    }
  }
};

struct Attempt {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  Eigen::MatrixXd hessian;
  bool hessian_pd = false;
  bool converged = false;
  int iterations = 0;
  std::string message;
};

inline bool positive_definite(const Eigen::MatrixXd& H) {
  if (!H.allFinite()) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (H + H.transpose()),
                                                     Eigen::EigenvaluesOnly);
  return eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0;
}

/// One optimization run followed by up to five Newton steps on the numerical
/// Hessian when the quasi-Newton gradient test was not met.
inline Attempt run_attempt(const Objective& obj, const Eigen::VectorXd& x0,
                           const FitConfig& config) {
  auto grad = [&](const Eigen::VectorXd& x) { return numdiff::central_gradient(obj, x); };
  OptimizerOptions opts;
  opts.gradient_tol = config.optimizer_tol;
  opts.max_iters = config.max_iters;
  const OptimizerResult r = minimize_bfgs(obj, grad, x0, opts);

  Attempt a;
  a.x = r.x;
  a.f = r.f;
  a.grad = r.grad;
  a.iterations = r.iterations;
  a.message = r.message;
  if (!std::isfinite(a.f) || !a.grad.allFinite()) return a;

  auto tol_met = [&](const Attempt& t) {
    return t.grad.norm() <= config.optimizer_tol * (1.0 + std::abs(t.f));
  };
  a.hessian = numdiff::central_hessian(obj, a.x, a.f);
  a.hessian_pd = positive_definite(a.hessian);
  for (int step = 0; step < 5 && !tol_met(a) && a.hessian_pd; ++step) {
    const Eigen::VectorXd dir = -a.hessian.ldlt().solve(a.grad);
    // Near the optimum the predicted decrease can fall below the rounding
    // level of f, so a step is also accepted when it shrinks the gradient
    // without raising f beyond that level.
    const double noise = 1e-13 * (1.0 + std::abs(a.f));
    double t = 1.0;
    bool moved = false;
    for (int back = 0; back < 20; ++back, t *= 0.5) {
      const Eigen::VectorXd xt = a.x + t * dir;
      const double ft = obj(xt);
      if (!(ft <= a.f + noise)) continue;
      Eigen::VectorXd gt = grad(xt);
      if (ft < a.f || gt.norm() < a.grad.norm()) {
        a.x = xt;
        a.f = ft;
        a.grad = std::move(gt);
        moved = true;
        break;
      }
    }
    if (!moved) break;
    a.hessian = numdiff::central_hessian(obj, a.x, a.f);
    a.hessian_pd = positive_definite(a.hessian);
    a.message = "gradient tolerance met after Newton refinement";
  }
  a.converged = tol_met(a) && a.hessian_pd && a.grad.allFinite();
  if (!a.converged)
    a.message = !a.hessian_pd ? "Hessian is not positive definite at the solution"
                              : "gradient tolerance not met";
  return a;
}

}  // namespace detail

/// Maximum-likelihood fit of `form` to `sample`.
inline FitResult fit(const FunctionalForm& form, const LongitudinalSample& sample,
                     const FitConfig& config = {},
                     const std::optional<ParameterSet>& start = std::nullopt) {
  if (config.max_retries < 1 || !(config.optimizer_tol > 0) || config.max_iters < 1)
    throw ModelError("invalid fit configuration");
  FitResult result;
  result.n = static_cast<int>(sample.size());
  if (sample.empty()) {
    result.message = "sample is empty";
    return result;
  }
  if (sample.waves() < form.factor_count() + 1) {
    result.message = "too few waves for this functional form";
    return result;
  }

  std::optional<Parameterization> par;
  Eigen::VectorXd x0;
  try {
    par.emplace(form, sample.waves());
    x0 = par->to_internal(start ? *start : default_start(form, sample));
  } catch (const ModelError& e) {
    result.message = e.what();
    return result;
  }
  result.names = par->names();
  result.n_free = par->size();
  const detail::Objective obj{form, *par, sample, config.workers};

  Philox rng(config.seed, 0x6a69747465720000ULL);  // jitter stream
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  detail::Attempt best;
  int attempts = 0;
  for (; attempts < config.max_retries; ++attempts) {
    Eigen::VectorXd xs = x0;
    if (attempts > 0)
      for (Eigen::Index i = 0; i < xs.size(); ++i)
        xs(i) += config.jitter_scale * std::max(std::abs(xs(i)), 0.1) * unif(rng);
    if (!std::isfinite(obj(xs))) continue;
    detail::Attempt a = detail::run_attempt(obj, xs, config);
    if (a.f < best.f || !std::isfinite(best.f)) best = std::move(a);
    if (best.converged) {
      ++attempts;
      break;
    }
  }
  result.n_retries_used = std::max(0, attempts - 1);
  if (!std::isfinite(best.f)) {
    result.status = FitStatus::Failed;
    result.message = "likelihood could not be evaluated from any starting value";
    return result;
  }

  result.params = par->to_natural(best.x);
  result.estimates = par->natural_vector(result.params);
  result.minus2ll = 2.0 * best.f;
  const auto ic = information_criteria(result.minus2ll, result.n_free, result.n);
  result.aic = ic.aic;
  result.bic = ic.bic;
  result.iterations = best.iterations;
  result.gradient_norm = best.grad.norm();
  result.status = best.converged ? FitStatus::Converged : FitStatus::RetriesExhausted;
  result.message = best.message;

  const Eigen::Index p = result.n_free;
  result.cov = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  result.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  result.wald_p = result.se;
  if (best.hessian_pd) {
    const Eigen::MatrixXd cov_internal = best.hessian.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd jac = numdiff::central_jacobian(
        [&](const Eigen::VectorXd& x) { return par->natural_vector(par->to_natural(x)); }, best.x);
    result.cov = jac * cov_internal * jac.transpose();
    result.cov = 0.5 * (result.cov + result.cov.transpose()).eval();
    for (Eigen::Index i = 0; i < p; ++i) {
      result.se(i) = std::sqrt(std::max(result.cov(i, i), 0.0));
      result.wald_p(i) = std::erfc(std::abs(result.estimates(i) / result.se(i)) / std::sqrt(2.0));
    }
    if (result.status == FitStatus::Converged && !(result.se.array() > 0).all()) {
      result.status = FitStatus::RetriesExhausted;
      result.message = "standard errors are not all positive";
    }
  }
  return result;
}

}  // namespace lcsm
