#pragma once

// Longitudinal samples, model-implied moments and the full-information
// maximum likelihood (FIML) objective.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcsm/model.hpp"
#include "lcsm/numdiff.hpp"
#include "lcsm/parallel.hpp"
#include "lcsm/parameterization.hpp"

namespace lcsm {

/// Raised when an individual's implied covariance is numerically singular.
class SingularCovarianceError : public std::runtime_error {
 public:
  SingularCovarianceError(std::string id, double condition)
      : std::runtime_error("implied covariance of individual '" + id +
                           "' is numerically singular (condition " + std::to_string(condition) +
                           ")"),
        id_(std::move(id)),
        condition_(condition) {}

  const std::string& id() const { return id_; }
  double condition() const { return condition_; }

 private:
  std::string id_;
  double condition_;
};

inline constexpr double kConditionBound = 1e12;

/// One individual's observed data. `schedule` covers all J waves; times of
/// waves without an outcome are filled in (see LongitudinalSample).
struct Individual {
  std::string id;
  Schedule schedule;
  std::vector<int> observed;  // wave indices (0-based) with an outcome
  Eigen::VectorXd y;          // outcomes at `observed`
};

/// Wide-format longitudinal data: outcomes and measurement times per
/// individual and wave, with NaN marking missing entries.
///
/// Individuals with fewer than two observed outcomes are excluded and
/// counted. A recorded time at a wave without an outcome is kept. A missing
/// time there is placed between the individual's neighbouring known times in
/// proportion to the wave-mean times (or shifted by the wave-mean spacing
/// beyond the first/last known wave); it only matters for change-score
/// loadings, which need every interval.
class LongitudinalSample {
 public:
  LongitudinalSample(std::vector<std::string> ids, const Eigen::MatrixXd& outcomes,
                     const Eigen::MatrixXd& times) {
    const Eigen::Index n = outcomes.rows();
    const Eigen::Index J = outcomes.cols();
    if (times.rows() != n || times.cols() != J)
      throw ModelError("outcome and time matrices must have the same shape");
    if (static_cast<Eigen::Index>(ids.size()) != n)
      throw ModelError("one id per row is required");
    if (J < 2) throw ModelError("at least two waves are required");
    waves_ = static_cast<int>(J);

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
      int count = 0;
      for (Eigen::Index j = 0; j < J; ++j) {
        if (std::isnan(outcomes(i, j))) continue;
        if (!std::isfinite(outcomes(i, j)))
          throw ModelError("individual '" + ids[i] + "' has a non-finite outcome");
        if (!std::isfinite(times(i, j)))
          throw ModelError("individual '" + ids[i] + "' has an outcome without a time at wave " +
                           std::to_string(j + 1));
        ++count;
      }
      if (count < 2)
        excluded_ids_.push_back(ids[i]);
      else
        keep.push_back(i);
    }

    // Wave-mean times over observed occasions of retained individuals.
    wave_means_ = Eigen::VectorXd::Zero(J);
    for (Eigen::Index j = 0; j < J; ++j) {
      double sum = 0.0;
      int count = 0;
      for (Eigen::Index i : keep)
        if (!std::isnan(outcomes(i, j))) {
          sum += times(i, j);
          ++count;
        }
      if (count == 0 && !keep.empty())
        throw ModelError("wave " + std::to_string(j + 1) + " has no observed outcome");
      wave_means_(j) = count ? sum / count : 0.0;
    }

    for (Eigen::Index i : keep) {
      std::vector<int> observed;
      for (Eigen::Index j = 0; j < J; ++j)
        if (!std::isnan(outcomes(i, j))) observed.push_back(static_cast<int>(j));
      std::vector<int> known;
      for (Eigen::Index j = 0; j < J; ++j)
        if (std::isfinite(times(i, j))) known.push_back(static_cast<int>(j));
      for (std::size_t m = 1; m < known.size(); ++m)
        if (!(times(i, known[m]) > times(i, known[m - 1])))
          throw ModelError("individual '" + ids[i] + "' has non-increasing measurement times");
      Eigen::VectorXd t(J);
      for (Eigen::Index j = 0; j < J; ++j) t(j) = std::numeric_limits<double>::quiet_NaN();
      for (int j : known) t(j) = times(i, j);
      fill_times(t, known);
      Eigen::VectorXd y(observed.size());
      for (std::size_t m = 0; m < observed.size(); ++m) y(m) = outcomes(i, observed[m]);
      try {
        individuals_.push_back(Individual{ids[i], Schedule(t), std::move(observed), std::move(y)});
      } catch (const ModelError&) {
        throw ModelError("individual '" + ids[i] + "' has an invalid measurement schedule");
      }
    }
  }

  std::size_t size() const { return individuals_.size(); }
  bool empty() const { return individuals_.empty(); }
  int waves() const { return waves_; }
  const std::vector<Individual>& individuals() const { return individuals_; }
  const Individual& operator[](std::size_t i) const { return individuals_[i]; }
  int excluded() const { return static_cast<int>(excluded_ids_.size()); }
  const std::vector<std::string>& excluded_ids() const { return excluded_ids_; }
  /// Average observed time at each wave, the reference schedule for
  /// population-level summaries.
  const Eigen::VectorXd& wave_mean_times() const { return wave_means_; }

  std::size_t observation_count() const {
    std::size_t total = 0;
    for (const auto& ind : individuals_) total += ind.observed.size();
    return total;
  }

  /// Outcome at (individual, wave) or NaN.
  Eigen::MatrixXd outcome_matrix() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(size()), waves_,
                                                    std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t m = 0; m < individuals_[i].observed.size(); ++m)
        out(static_cast<Eigen::Index>(i), individuals_[i].observed[m]) = individuals_[i].y(m);
    return out;
  }

 private:
  void fill_times(Eigen::VectorXd& t, const std::vector<int>& known) const {
    const int J = waves_;
    for (int j = 0; j < J; ++j) {
      if (!std::isnan(t(j))) continue;
      int prev = -1, next = -1;
      for (int o : known) {
        if (o < j) prev = o;
        if (o > j && next < 0) next = o;
      }
      if (prev >= 0 && next >= 0) {
        const double span = wave_means_(next) - wave_means_(prev);
        const double frac = span > 0 ? (wave_means_(j) - wave_means_(prev)) / span
                                     : double(j - prev) / double(next - prev);
        t(j) = t(prev) + frac * (t(next) - t(prev));
      } else if (prev >= 0) {
        t(j) = t(prev) + (wave_means_(j) - wave_means_(prev));
      } else {
        t(j) = t(next) - (wave_means_(next) - wave_means_(j));
      }
    }
  }

  int waves_ = 0;
  std::vector<Individual> individuals_;
  std::vector<std::string> excluded_ids_;
  Eigen::VectorXd wave_means_;
};

/// Model-implied mean and covariance of one individual's outcomes.
struct ImpliedMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline ImpliedMoments implied_moments(const FunctionalForm& form, const ParameterSet& params,
                                      const Schedule& schedule) {
  validate(form, params, schedule.size());
  const Eigen::MatrixXd lambda = build_loading_matrix(form, params, schedule).values;
  ImpliedMoments m;
  m.mean = lambda * params.growth_means;
  m.cov = lambda * params.growth_cov * lambda.transpose();
  m.cov.diagonal().array() += params.residual_var;
  return m;
}

namespace detail {

/// Factor F with growth_cov = F F^T (growth_cov is PSD).
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

/// Log-density of one individual's observed outcomes.
///
/// Sigma = B B^T + theta I with B = Lambda_obs F, so the determinant and the
/// quadratic form reduce to the k x k matrix M = theta I + B^T B:
///   ln|Sigma| = (J_obs - k) ln theta + ln|M|
///   r^T Sigma^-1 r = (r^T r - v^T M^-1 v) / theta,  v = B^T r.
/// The eigenvalues of Sigma are theta and those of M, which gives the
/// condition number directly.
inline double individual_loglik(const FunctionalForm& form, const ParameterSet& params,
                                const Eigen::MatrixXd& factor, const Individual& ind) {
  const Eigen::MatrixXd lambda = build_loading_matrix(form, params, ind.schedule).values;
  const Eigen::Index jo = static_cast<Eigen::Index>(ind.observed.size());
  const Eigen::Index k = lambda.cols();
  Eigen::MatrixXd lo(jo, k);
  for (Eigen::Index m = 0; m < jo; ++m) lo.row(m) = lambda.row(ind.observed[m]);
  const Eigen::VectorXd r = ind.y - lo * params.growth_means;
  const Eigen::MatrixXd B = lo * factor;
  const double theta = params.residual_var;
  Eigen::MatrixXd M = B.transpose() * B;
  M.diagonal().array() += theta;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeDirect(M, Eigen::EigenvaluesOnly);
  const double condition = eig.eigenvalues().maxCoeff() / theta;
  if (!(condition <= kConditionBound)) throw SingularCovarianceError(ind.id, condition);

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw SingularCovarianceError(ind.id, condition);
  const Eigen::VectorXd v = B.transpose() * r;
  const Eigen::VectorXd w = llt.matrixL().solve(v);
  const double quad = (r.squaredNorm() - w.squaredNorm()) / theta;
  const double logdet_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double logdet = static_cast<double>(jo - k) * std::log(theta) + logdet_m;
  return -0.5 * static_cast<double>(jo) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet -
         0.5 * quad;
}

}  // namespace detail

/// Per-individual log-likelihood contributions, in sample order.
inline std::vector<double> loglik_contributions(const FunctionalForm& form,
                                                const ParameterSet& params,
                                                const LongitudinalSample& sample,
                                                int workers = default_workers()) {
  validate(form, params, sample.waves());
  const Eigen::MatrixXd factor = detail::covariance_factor(params.growth_cov);
  std::vector<double> out(sample.size());
  parallel_for(sample.size(), workers, [&](std::size_t i) {
    out[i] = detail::individual_loglik(form, params, factor, sample[i]);
  });
  return out;
}

/// FIML log-likelihood including the -(J_i/2) ln(2 pi) constants. Summation
/// is pairwise in sample order, so the value does not depend on `workers`.
inline double loglik(const FunctionalForm& form, const ParameterSet& params,
                     const LongitudinalSample& sample, int workers = default_workers()) {
  const auto parts = loglik_contributions(form, params, sample, workers);
  return pairwise_sum(parts);
}

/// Central-difference gradient of the log-likelihood with respect to the
/// internal (unconstrained) parameter vector, step max(1e-6, 1e-7|x|) times
/// `step_scale`.
inline Eigen::VectorXd loglik_gradient(const FunctionalForm& form, const ParameterSet& params,
                                       const LongitudinalSample& sample,
                                       double step_scale = 1.0,
                                       int workers = default_workers()) {
  const Parameterization par(form, sample.waves());
  const Eigen::VectorXd x = par.to_internal(params);
  return numdiff::central_gradient(
      [&](const Eigen::VectorXd& z) { return loglik(form, par.to_natural(z), sample, workers); },
      x, step_scale);
}

}  // namespace lcsm
