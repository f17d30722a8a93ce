#pragma once

// Functional forms, parameter sets, measurement schedules and the
// per-individual factor loading matrices built from them.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace lcsm {

/// Thrown when inputs violate a model precondition (dimensions, ordering,
/// parameter domain).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Kind { Nonparametric, Quadratic, NegativeExponential, JenssBayley };
enum class Framework { LCSM, LGCM };

inline std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::Nonparametric: return "lbgm";
    case Kind::Quadratic: return "quad";
    case Kind::NegativeExponential: return "exp";
    case Kind::JenssBayley: return "jb";
  }
  return "?";
}

inline std::string_view framework_name(Framework framework) {
  return framework == Framework::LCSM ? "lcsm" : "lgcm";
}

inline std::optional<Kind> parse_kind(std::string_view text) {
  if (text == "lbgm" || text == "nonparametric") return Kind::Nonparametric;
  if (text == "quad" || text == "quadratic") return Kind::Quadratic;
  if (text == "exp" || text == "negative-exponential") return Kind::NegativeExponential;
  if (text == "jb" || text == "jenss-bayley") return Kind::JenssBayley;
  return std::nullopt;
}

inline std::optional<Framework> parse_framework(std::string_view text) {
  if (text == "lcsm") return Framework::LCSM;
  if (text == "lgcm") return Framework::LGCM;
  return std::nullopt;
}

/// Which trajectory shape a model uses and whether it is written as a latent
/// change score model or a latent growth curve model. The nonparametric
/// (latent basis) shape exists only in the change-score framework.
class FunctionalForm {
 public:
  FunctionalForm(Kind kind, Framework framework) : kind_(kind), framework_(framework) {
    if (kind == Kind::Nonparametric && framework == Framework::LGCM)
      throw ModelError("nonparametric form is only available in the LCSM framework");
  }

  Kind kind() const { return kind_; }
  Framework framework() const { return framework_; }
  bool parametric() const { return kind_ != Kind::Nonparametric; }

  /// Number of growth factors (k).
  int factor_count() const {
    return (kind_ == Kind::Quadratic || kind_ == Kind::JenssBayley) ? 3 : 2;
  }

  std::string label() const {
    return std::string(kind_name(kind_)) + "/" + std::string(framework_name(framework_));
  }

  friend bool operator==(const FunctionalForm&, const FunctionalForm&) = default;

 private:
  Kind kind_;
  Framework framework_;
};

/// Natural-scale model parameters. `gamma` holds the relative rates of all
/// J-1 intervals with gamma(0) == 1 (nonparametric form only); `b` and `c`
/// are used by the negative exponential and Jenss-Bayley forms respectively.
struct ParameterSet {
  Eigen::VectorXd growth_means;
  Eigen::MatrixXd growth_cov;
  double residual_var = 1.0;
  Eigen::VectorXd gamma;
  double b = 0.0;
  double c = 0.0;
};

inline bool operator==(const ParameterSet& a, const ParameterSet& b) {
  auto same_vec = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return x.size() == y.size() && (x.size() == 0 || x == y);
  };
  return same_vec(a.growth_means, b.growth_means) &&
         a.growth_cov.rows() == b.growth_cov.rows() &&
         a.growth_cov.cols() == b.growth_cov.cols() &&
         (a.growth_cov.size() == 0 || a.growth_cov == b.growth_cov) &&
         a.residual_var == b.residual_var && same_vec(a.gamma, b.gamma) && a.b == b.b &&
         a.c == b.c;
}

/// Checks that `growth_cov` is symmetric positive semi-definite.
inline bool is_psd(const Eigen::MatrixXd& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!((m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale)) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() >= -tol * scale;
}

/// Throws ModelError unless `params` is consistent with `form`. When `waves`
/// is given, the nonparametric gamma vector must have length waves-1.
inline void validate(const FunctionalForm& form, const ParameterSet& params,
                     std::optional<int> waves = std::nullopt) {
  const int k = form.factor_count();
  if (params.growth_means.size() != k)
    throw ModelError("growth_means must have length " + std::to_string(k));
  if (params.growth_cov.rows() != k || params.growth_cov.cols() != k)
    throw ModelError("growth_cov must be " + std::to_string(k) + "x" + std::to_string(k));
  if (!params.growth_means.allFinite() || !params.growth_cov.allFinite())
    throw ModelError("growth factor moments must be finite");
  if (!is_psd(params.growth_cov))
    throw ModelError("growth_cov must be symmetric positive semi-definite");
  if (!(params.residual_var > 0.0) || !std::isfinite(params.residual_var))
    throw ModelError("residual_var must be positive");
  if (form.kind() == Kind::Nonparametric) {
    if (params.gamma.size() < 1 || params.gamma(0) != 1.0)
      throw ModelError("nonparametric gamma must start with the fixed value 1");
    if (waves && params.gamma.size() != *waves - 1)
      throw ModelError("gamma has length " + std::to_string(params.gamma.size()) +
                       " but the schedule has " + std::to_string(*waves - 1) + " intervals");
    if (!params.gamma.allFinite()) throw ModelError("gamma must be finite");
  } else if (params.gamma.size() != 0) {
    throw ModelError("gamma is only used by the nonparametric form");
  }
  if (form.kind() == Kind::NegativeExponential && !(params.b > 0.0 && std::isfinite(params.b)))
    throw ModelError("negative exponential form requires b > 0");
  if (form.kind() == Kind::JenssBayley && !(params.c < 0.0 && std::isfinite(params.c)))
    throw ModelError("Jenss-Bayley form requires c < 0");
}

/// Strictly increasing measurement times of one individual, with the
/// interval midpoints (t_j + t_{j-1}) / 2 derived on construction.
class Schedule {
 public:
  explicit Schedule(Eigen::VectorXd times) : times_(std::move(times)) {
    if (times_.size() < 1) throw ModelError("schedule needs at least one time");
    if (!times_.allFinite()) throw ModelError("schedule times must be finite");
    for (Eigen::Index j = 1; j < times_.size(); ++j)
      if (!(times_(j) > times_(j - 1)))
        throw ModelError("schedule times must be strictly increasing");
    midpoints_.resize(times_.size() - 1);
    lengths_.resize(times_.size() - 1);
    for (Eigen::Index j = 1; j < times_.size(); ++j) {
      midpoints_(j - 1) = (times_(j) + times_(j - 1)) / 2.0;
      lengths_(j - 1) = times_(j) - times_(j - 1);
    }
  }

  int size() const { return static_cast<int>(times_.size()); }
  int intervals() const { return size() - 1; }
  const Eigen::VectorXd& times() const { return times_; }
  /// Entry m is the midpoint of the interval ending at wave m+2 (1-based).
  const Eigen::VectorXd& midpoints() const { return midpoints_; }
  const Eigen::VectorXd& lengths() const { return lengths_; }

 private:
  Eigen::VectorXd times_;
  Eigen::VectorXd midpoints_;
  Eigen::VectorXd lengths_;
};

/// J x k factor loadings of one individual.
struct LoadingMatrix {
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Row vector r with r . eta = rate-of-change of a parametric curve at time t.
inline Eigen::RowVectorXd rate_row(Kind kind, const ParameterSet& params, double t) {
  switch (kind) {
    case Kind::Quadratic: {
      Eigen::RowVectorXd r(3);
      r << 0.0, 1.0, 2.0 * t;
      return r;
    }
    case Kind::NegativeExponential: {
      Eigen::RowVectorXd r(2);
      r << 0.0, params.b * std::exp(-params.b * t);
      return r;
    }
    case Kind::JenssBayley: {
      Eigen::RowVectorXd r(3);
      r << 0.0, 1.0, params.c * std::exp(params.c * t);
      return r;
    }
    case Kind::Nonparametric: break;
  }
  throw ModelError("nonparametric rates are interval-wise, not pointwise");
}

/// Closed-form growth-curve loadings at time t (LGCM row).
inline Eigen::RowVectorXd growth_row(Kind kind, const ParameterSet& params, double t) {
  switch (kind) {
    case Kind::Quadratic: {
      Eigen::RowVectorXd r(3);
      r << 1.0, t, t * t;
      return r;
    }
    case Kind::NegativeExponential: {
      Eigen::RowVectorXd r(2);
      r << 1.0, 1.0 - std::exp(-params.b * t);
      return r;
    }
    case Kind::JenssBayley: {
      Eigen::RowVectorXd r(3);
      r << 1.0, t, std::exp(params.c * t) - 1.0;
      return r;
    }
    case Kind::Nonparametric: break;
  }
  throw ModelError("the nonparametric form has no closed-form growth curve");
}

/// (J-1) x k matrix whose row m maps eta to the rate-of-change used for the
/// interval ending at wave m+2: gamma-scaled slope for the nonparametric form,
/// the instantaneous slope at the interval midpoint for the parametric forms
/// (LCSM), or the exact average rate over the interval (LGCM).
inline Eigen::MatrixXd interval_rate_matrix(const FunctionalForm& form,
                                            const ParameterSet& params,
                                            const Schedule& schedule) {
  const int k = form.factor_count();
  const int m = schedule.intervals();
  Eigen::MatrixXd rates(m, k);
  if (form.kind() == Kind::Nonparametric) {
    if (params.gamma.size() != m)
      throw ModelError("gamma has length " + std::to_string(params.gamma.size()) +
                       " but the schedule has " + std::to_string(m) + " intervals");
    rates.col(0).setZero();
    rates.col(1) = params.gamma;
    return rates;
  }
  const auto& t = schedule.times();
  for (int j = 0; j < m; ++j) {
    if (form.framework() == Framework::LCSM) {
      rates.row(j) = rate_row(form.kind(), params, schedule.midpoints()(j));
    } else {
      rates.row(j) = (growth_row(form.kind(), params, t(j + 1)) -
                      growth_row(form.kind(), params, t(j))) /
                     schedule.lengths()(j);
    }
  }
  return rates;
}

/// Builds the loading matrix of one individual.
///
/// In the change-score framework row j is the cumulative sum of the
/// interval increments rate_m * (t_m - t_{m-1}) for m <= j, so the product
/// with eta is the area under the rate-of-change curve from the first
/// occasion to wave j. In the growth-curve framework the closed-form curve
/// basis is evaluated at each time.
inline LoadingMatrix build_loading_matrix(const FunctionalForm& form, const ParameterSet& params,
                                          const Schedule& schedule) {
  const int k = form.factor_count();
  const int J = schedule.size();
  if (J < 2) throw ModelError("loading matrix needs at least two occasions");
  if (form.kind() == Kind::Nonparametric && params.gamma.size() != J - 1)
    throw ModelError("gamma has length " + std::to_string(params.gamma.size()) +
                     " but the schedule has " + std::to_string(J - 1) + " intervals");

  LoadingMatrix lambda{Eigen::MatrixXd(J, k)};
  if (form.framework() == Framework::LGCM) {
    for (int j = 0; j < J; ++j)
      lambda.values.row(j) = growth_row(form.kind(), params, schedule.times()(j));
    return lambda;
  }
  const Eigen::MatrixXd rates = interval_rate_matrix(form, params, schedule);
  lambda.values.row(0).setZero();
  lambda.values(0, 0) = 1.0;
  for (int j = 1; j < J; ++j)
    lambda.values.row(j) = lambda.values.row(j - 1) + rates.row(j - 1) * schedule.lengths()(j - 1);
  return lambda;
}

/// Instantaneous rate-of-change of a parametric curve with growth factors
/// `factors` at time t.
inline double instantaneous_rate(const FunctionalForm& form, const Eigen::VectorXd& factors,
                                 const ParameterSet& params, double t) {
  if (!form.parametric())
    throw ModelError("nonparametric rates are interval-wise, not pointwise");
  if (factors.size() != form.factor_count())
    throw ModelError("factor vector has wrong length");
  return rate_row(form.kind(), params, t).dot(factors);
}

}  // namespace lcsm
