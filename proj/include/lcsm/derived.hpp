#pragma once

// Population moments of the rate-of-change, interval-specific change and
// change-from-baseline latent variables, their delta-method standard errors,
// and regression-method factor scores for individuals.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcsm/estimation.hpp"
#include "lcsm/likelihood.hpp"
#include "lcsm/model.hpp"
#include "lcsm/numdiff.hpp"
#include "lcsm/parameterization.hpp"
#include "lcsm/random.hpp"

namespace lcsm {

/// Moments per interval; entry m refers to the interval ending at wave m+2
/// (1-based), so change-from-baseline entry m is the change from wave 1 to
/// wave m+2.
struct DerivedChange {
  Schedule evaluated_at{Eigen::VectorXd::Zero(1)};
  Eigen::VectorXd rate_mean, rate_var;
  Eigen::VectorXd interval_change_mean, interval_change_var;
  Eigen::VectorXd cfb_mean, cfb_var;

  int intervals() const { return static_cast<int>(rate_mean.size()); }
};

namespace detail {

/// Rows mapping eta to the rate, interval change and change-from-baseline.
struct ChangeRows {
  Eigen::MatrixXd rate, change, cfb;
};

inline ChangeRows change_rows(const FunctionalForm& form, const ParameterSet& params,
                              const Schedule& schedule) {
  ChangeRows rows;
  rows.rate = interval_rate_matrix(form, params, schedule);
  rows.change = schedule.lengths().asDiagonal() * rows.rate;
  rows.cfb = rows.change;
  for (Eigen::Index m = 1; m < rows.cfb.rows(); ++m) rows.cfb.row(m) += rows.cfb.row(m - 1);
  return rows;
}

inline Eigen::VectorXd quadratic_forms(const Eigen::MatrixXd& rows, const Eigen::MatrixXd& cov) {
  return (rows * cov).cwiseProduct(rows).rowwise().sum().cwiseMax(0.0);
}

}  // namespace detail

/// Delta-method moments on `schedule` (an individual's schedule or the
/// wave-mean schedule). Means and variances of the rate use the rate row at
/// each interval; interval changes scale by the interval length (variance by
/// its square); change-from-baseline variances are the quadratic forms of
/// the cumulative change rows in the growth-factor covariance.
inline DerivedChange derived_moments(const FunctionalForm& form, const ParameterSet& params,
                                     const Schedule& schedule) {
  validate(form, params, schedule.size());
  if (schedule.size() < 2) throw ModelError("derived moments need at least two occasions");
  const auto rows = detail::change_rows(form, params, schedule);
  const Eigen::VectorXd& dt = schedule.lengths();
  DerivedChange d;
  d.evaluated_at = schedule;
  d.rate_mean = rows.rate * params.growth_means;
  d.rate_var = detail::quadratic_forms(rows.rate, params.growth_cov);
  d.interval_change_mean = d.rate_mean.cwiseProduct(dt);
  d.interval_change_var = d.rate_var.cwiseProduct(dt.cwiseProduct(dt));
  d.cfb_mean = d.interval_change_mean;
  for (Eigen::Index m = 1; m < d.cfb_mean.size(); ++m) d.cfb_mean(m) += d.cfb_mean(m - 1);
  d.cfb_var = detail::quadratic_forms(rows.cfb, params.growth_cov);
  return d;
}

/// Sampling check of derived_moments: draws eta ~ MVN(mu, Psi), evaluates the
/// rate, interval change and change-from-baseline of each draw, and returns
/// the largest relative discrepancy between the sample means/variances and
/// the delta-method values (absolute where the delta-method value is 0).
inline double derived_moments_mc_check(const FunctionalForm& form, const ParameterSet& params,
                                       const Schedule& schedule, int n_draws,
                                       std::uint64_t seed) {
  if (n_draws < 100000) throw ModelError("the sampling check needs at least 1e5 draws");
  const DerivedChange exact = derived_moments(form, params, schedule);
  const auto rows = detail::change_rows(form, params, schedule);
  const Eigen::Index m = rows.rate.rows();
  Eigen::MatrixXd all(3 * m, rows.rate.cols());
  all << rows.rate, rows.change, rows.cfb;

  Philox rng(seed, 0);
  MultivariateNormal dist(params.growth_means, params.growth_cov);
  Eigen::VectorXd exact_mean(3 * m), exact_var(3 * m);
  exact_mean << exact.rate_mean, exact.interval_change_mean, exact.cfb_mean;
  exact_var << exact.rate_var, exact.interval_change_var, exact.cfb_var;

  // Deviations from the image of the mean vector, so that identical draws
  // give exact means and zero variances.
  const Eigen::VectorXd center = all * params.growth_means;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3 * m), sum_sq = sum;
  for (int s = 0; s < n_draws; ++s) {
    const Eigen::VectorXd d = all * dist(rng) - center;
    sum += d;
    sum_sq += d.cwiseProduct(d);
  }
  const double n = n_draws;
  const Eigen::VectorXd mean = exact_mean + sum / n;
  const Eigen::VectorXd var = (sum_sq - sum.cwiseProduct(sum) / n) / (n - 1);

  auto err = [](double sample, double truth) {
    const double diff = std::abs(sample - truth);
    return truth == 0.0 ? diff : diff / std::abs(truth);
  };
  double worst = 0.0;
  for (Eigen::Index i = 0; i < 3 * m; ++i) {
    worst = std::max(worst, err(mean(i), exact_mean(i)));
    worst = std::max(worst, err(var(i), exact_var(i)));
  }
  return worst;
}

/// Delta-method standard errors of every derived moment, taken over the full
/// sampling covariance of the fitted free parameters. The returned structure
/// holds standard errors in place of the moments.
inline DerivedChange derived_standard_errors(const FunctionalForm& form, const FitResult& fit,
                                             const Schedule& schedule) {
  if (fit.cov.rows() != fit.n_free || !fit.cov.allFinite())
    throw ModelError("fit has no usable parameter covariance");
  const Parameterization par(form, schedule.size());
  auto stacked = [&](const Eigen::VectorXd& theta) {
    const DerivedChange d = derived_moments(form, par.from_natural_vector(theta), schedule);
    const Eigen::Index m = d.intervals();
    Eigen::VectorXd v(6 * m);
    v << d.rate_mean, d.rate_var, d.interval_change_mean, d.interval_change_var, d.cfb_mean,
        d.cfb_var;
    return v;
  };
  const Eigen::MatrixXd jac = numdiff::central_jacobian(stacked, fit.estimates);
  const Eigen::VectorXd se =
      (jac * fit.cov).cwiseProduct(jac).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Index m = schedule.intervals();
  DerivedChange out;
  out.evaluated_at = schedule;
  out.rate_mean = se.segment(0, m);
  out.rate_var = se.segment(m, m);
  out.interval_change_mean = se.segment(2 * m, m);
  out.interval_change_var = se.segment(3 * m, m);
  out.cfb_mean = se.segment(4 * m, m);
  out.cfb_var = se.segment(5 * m, m);
  return out;
}

/// Per-individual scores. Rate and interval change have one entry per
/// interval; change-from-baseline and true score have one entry per wave
/// (change-from-baseline is 0 at wave 1).
struct IndividualScores {
  std::string id;
  Eigen::VectorXd eta_hat;
  Eigen::VectorXd rate_hat;
  Eigen::VectorXd interval_change_hat;
  Eigen::VectorXd cfb_hat;
  Eigen::VectorXd true_score_hat;
};

struct FactorScores {
  std::vector<IndividualScores> individuals;

  std::size_t size() const { return individuals.size(); }
  const IndividualScores& operator[](std::size_t i) const { return individuals[i]; }

  /// n x k matrix of growth-factor scores.
  Eigen::MatrixXd eta_matrix() const {
    if (individuals.empty()) return {};
    Eigen::MatrixXd out(static_cast<Eigen::Index>(size()), individuals.front().eta_hat.size());
    for (std::size_t i = 0; i < size(); ++i)
      out.row(static_cast<Eigen::Index>(i)) = individuals[i].eta_hat.transpose();
    return out;
  }
};

/// Regression-method scores at the given parameters:
///   eta_hat = mu + Psi Lambda^T Sigma^-1 (y - Lambda mu)
/// over each individual's observed rows. The change variables follow from
/// eta_hat through the individual's rate rows.
inline FactorScores factor_scores(const FunctionalForm& form, const ParameterSet& params,
                                  const LongitudinalSample& sample,
                                  int workers = default_workers()) {
  validate(form, params, sample.waves());
  FactorScores out;
  out.individuals.resize(sample.size());
  parallel_for(sample.size(), workers, [&](std::size_t i) {
    const Individual& ind = sample[i];
    const Eigen::MatrixXd lambda = build_loading_matrix(form, params, ind.schedule).values;
    const auto jo = static_cast<Eigen::Index>(ind.observed.size());
    Eigen::MatrixXd lo(jo, lambda.cols());
    for (Eigen::Index m = 0; m < jo; ++m) lo.row(m) = lambda.row(ind.observed[m]);
    Eigen::MatrixXd sigma = lo * params.growth_cov * lo.transpose();
    sigma.diagonal().array() += params.residual_var;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw SingularCovarianceError(ind.id, std::numeric_limits<double>::infinity());
    const Eigen::VectorXd resid = ind.y - lo * params.growth_means;

    IndividualScores s;
    s.id = ind.id;
    s.eta_hat = params.growth_means + params.growth_cov * lo.transpose() * llt.solve(resid);
    const Eigen::MatrixXd rates = interval_rate_matrix(form, params, ind.schedule);
    s.rate_hat = rates * s.eta_hat;
    s.interval_change_hat = s.rate_hat.cwiseProduct(ind.schedule.lengths());
    const int J = ind.schedule.size();
    s.cfb_hat = Eigen::VectorXd::Zero(J);
    for (int j = 1; j < J; ++j) s.cfb_hat(j) = s.cfb_hat(j - 1) + s.interval_change_hat(j - 1);
    s.true_score_hat = s.cfb_hat.array() + s.eta_hat(0);
    out.individuals[i] = std::move(s);
  });
  return out;
}

/// Scores at the estimates of a converged fit.
inline FactorScores factor_scores(const FunctionalForm& form, const FitResult& fit,
                                  const LongitudinalSample& sample,
                                  int workers = default_workers()) {
  if (fit.status != FitStatus::Converged)
    throw ModelError("factor scores need a converged fit");
  return factor_scores(form, fit.params, sample, workers);
}

}  // namespace lcsm
