#pragma once

// Random parameter sets and small datasets for tests.

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcsm/likelihood.hpp"
#include "lcsm/model.hpp"
#include "lcsm/random.hpp"

namespace fixtures {

inline lcsm::ParameterSet random_params(lcsm::Kind kind, int J, lcsm::Philox& rng) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = (kind == lcsm::Kind::Quadratic || kind == lcsm::Kind::JenssBayley) ? 3 : 2;
  lcsm::ParameterSet p;
  p.growth_means = Eigen::VectorXd(k);
  for (int i = 0; i < k; ++i) p.growth_means(i) = (i == 0 ? 50.0 : 2.0) + z(rng);
  Eigen::MatrixXd a(k, k);
  for (int i = 0; i < k * k; ++i) a.data()[i] = 0.5 * z(rng);
  const Eigen::MatrixXd m = a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(k, k);
  p.growth_cov = 0.5 * (m + m.transpose());
  p.residual_var = 0.5 + u(rng);
  if (kind == lcsm::Kind::Nonparametric) {
    p.gamma = Eigen::VectorXd(J - 1);
    p.gamma(0) = 1.0;
    for (int g = 1; g < J - 1; ++g) p.gamma(g) = 0.3 + u(rng);
  }
  if (kind == lcsm::Kind::NegativeExponential) p.b = 0.2 + u(rng);
  if (kind == lcsm::Kind::JenssBayley) p.c = -(0.2 + u(rng));
  return p;
}

/// Jittered increasing times starting near 0.
inline Eigen::MatrixXd random_times(int n, int J, lcsm::Philox& rng, bool first_at_zero = false) {
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  Eigen::MatrixXd t(n, J);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < J; ++j) t(i, j) = j + ((j == 0 && first_at_zero) ? 0.0 : u(rng));
  return t;
}

inline Eigen::MatrixXd random_outcomes(int n, int J, lcsm::Philox& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd y(n, J);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < J; ++j) y(i, j) = 50.0 + 3.0 * j + 2.0 * z(rng);
  return y;
}

inline std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("p" + std::to_string(i + 1));
  return out;
}

inline const std::vector<lcsm::FunctionalForm>& all_forms() {
  using lcsm::Framework;
  using lcsm::Kind;
  static const std::vector<lcsm::FunctionalForm> forms = {
      {Kind::Nonparametric, Framework::LCSM},       {Kind::Quadratic, Framework::LCSM},
      {Kind::Quadratic, Framework::LGCM},           {Kind::NegativeExponential, Framework::LCSM},
      {Kind::NegativeExponential, Framework::LGCM}, {Kind::JenssBayley, Framework::LCSM},
      {Kind::JenssBayley, Framework::LGCM}};
  return forms;
}

}  // namespace fixtures
