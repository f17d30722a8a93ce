#pragma once

// Free-parameter layout of each model and the map between natural-scale
// parameters and an unconstrained internal vector used by the optimizer:
//   growth means, gamma          raw
//   growth covariance            log-Cholesky (log on the diagonal)
//   b, residual variance         log
//   c                            -log(-c)

#include <cmath>
#include <string>
#include <vector>

#include "lcsm/model.hpp"

namespace lcsm {

class Parameterization {
 public:
  Parameterization(FunctionalForm form, int waves) : form_(form), waves_(waves) {
    if (form.kind() == Kind::Nonparametric && waves < 3)
      throw ModelError("nonparametric form needs at least three waves");
    const int k = form.factor_count();
    for (int i = 0; i < k; ++i) names_.push_back("mu_eta" + std::to_string(i));
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) names_.push_back("psi" + std::to_string(i) + std::to_string(j));
    if (form.kind() == Kind::Nonparametric)
      for (int g = 2; g <= waves - 1; ++g) names_.push_back("gamma" + std::to_string(g));
    if (form.kind() == Kind::NegativeExponential) names_.push_back("b");
    if (form.kind() == Kind::JenssBayley) names_.push_back("c");
    names_.push_back("theta_eps");
  }

  const FunctionalForm& form() const { return form_; }
  int waves() const { return waves_; }
  int size() const { return static_cast<int>(names_.size()); }
  /// Natural-scale names in free-parameter order.
  const std::vector<std::string>& names() const { return names_; }

  /// Flattens the free natural-scale parameters in names() order.
  Eigen::VectorXd natural_vector(const ParameterSet& p) const {
    check(p);
    const int k = form_.factor_count();
    Eigen::VectorXd v(size());
    int pos = 0;
    for (int i = 0; i < k; ++i) v(pos++) = p.growth_means(i);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) v(pos++) = p.growth_cov(i, j);
    if (form_.kind() == Kind::Nonparametric)
      for (int g = 1; g < p.gamma.size(); ++g) v(pos++) = p.gamma(g);
    if (form_.kind() == Kind::NegativeExponential) v(pos++) = p.b;
    if (form_.kind() == Kind::JenssBayley) v(pos++) = p.c;
    v(pos++) = p.residual_var;
    return v;
  }

  /// Inverse of natural_vector. Does not validate the result.
  ParameterSet from_natural_vector(const Eigen::VectorXd& v) const {
    check_size(v);
    const int k = form_.factor_count();
    ParameterSet p;
    p.growth_means.resize(k);
    p.growth_cov.resize(k, k);
    int pos = 0;
    for (int i = 0; i < k; ++i) p.growth_means(i) = v(pos++);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) p.growth_cov(i, j) = p.growth_cov(j, i) = v(pos++);
    if (form_.kind() == Kind::Nonparametric) {
      p.gamma.resize(waves_ - 1);
      p.gamma(0) = 1.0;
      for (int g = 1; g < waves_ - 1; ++g) p.gamma(g) = v(pos++);
    }
    if (form_.kind() == Kind::NegativeExponential) p.b = v(pos++);
    if (form_.kind() == Kind::JenssBayley) p.c = v(pos++);
    p.residual_var = v(pos++);
    return p;
  }

  /// Requires a positive definite growth covariance.
  Eigen::VectorXd to_internal(const ParameterSet& p) const {
    check(p);
    const int k = form_.factor_count();
    Eigen::LLT<Eigen::MatrixXd> llt(p.growth_cov);
    if (llt.info() != Eigen::Success)
      throw ModelError("growth_cov must be positive definite for the internal parameterization");
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd x(size());
    int pos = 0;
    for (int i = 0; i < k; ++i) x(pos++) = p.growth_means(i);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) x(pos++) = (i == j) ? std::log(L(i, i)) : L(j, i);
    if (form_.kind() == Kind::Nonparametric)
      for (int g = 1; g < p.gamma.size(); ++g) x(pos++) = p.gamma(g);
    if (form_.kind() == Kind::NegativeExponential) x(pos++) = std::log(p.b);
    if (form_.kind() == Kind::JenssBayley) x(pos++) = -std::log(-p.c);
    x(pos++) = std::log(p.residual_var);
    return x;
  }

  ParameterSet to_natural(const Eigen::VectorXd& x) const {
    check_size(x);
    const int k = form_.factor_count();
    ParameterSet p;
    p.growth_means.resize(k);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
    int pos = 0;
    for (int i = 0; i < k; ++i) p.growth_means(i) = x(pos++);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) L(j, i) = (i == j) ? std::exp(x(pos++)) : x(pos++);
    p.growth_cov = L * L.transpose();
    if (form_.kind() == Kind::Nonparametric) {
      p.gamma.resize(waves_ - 1);
      p.gamma(0) = 1.0;
      for (int g = 1; g < waves_ - 1; ++g) p.gamma(g) = x(pos++);
    }
    if (form_.kind() == Kind::NegativeExponential) p.b = std::exp(x(pos++));
    if (form_.kind() == Kind::JenssBayley) p.c = -std::exp(-x(pos++));
    p.residual_var = std::exp(x(pos++));
    return p;
  }

 private:
  void check(const ParameterSet& p) const { validate(form_, p, waves_); }
  void check_size(const Eigen::VectorXd& v) const {
    if (v.size() != size()) throw ModelError("parameter vector has wrong length");
  }

  FunctionalForm form_;
  int waves_;
  std::vector<std::string> names_;
};

}  // namespace lcsm
