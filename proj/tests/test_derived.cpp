#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lcsm/derived.hpp"
#include "lcsm/simulation.hpp"

using namespace lcsm;

namespace {

Schedule sched(std::initializer_list<double> t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
  Eigen::Index i = 0;
  for (double x : t) v(i++) = x;
  return Schedule(v);
}

ParameterSet lbgm(double mu1, double psi11, Eigen::VectorXd gamma) {
  ParameterSet p;
  p.growth_means = Eigen::Vector2d(50, mu1);
  p.growth_cov = Eigen::Matrix2d::Zero();
  p.growth_cov(0, 0) = 25;
  p.growth_cov(1, 1) = psi11;
  p.gamma = std::move(gamma);
  return p;
}

}  // namespace

TEST(DerivedMoments, NonparametricFirstIntervalIsTheSlopeFactor) {
  const auto d = derived_moments({Kind::Nonparametric, Framework::LCSM},
                                 lbgm(29.401, 19.562, Eigen::Vector2d(1.0, 0.7)),
                                 sched({0, 1, 2}));
  EXPECT_DOUBLE_EQ(d.rate_mean(0), 29.401);
  EXPECT_DOUBLE_EQ(d.rate_var(0), 19.562);
}

TEST(DerivedMoments, NonparametricScalesWithRelativeRate) {
  const auto d = derived_moments({Kind::Nonparametric, Framework::LCSM},
                                 lbgm(3.0, 1.0, Eigen::Vector2d(1.0, 0.8)), sched({0, 1, 2}));
  EXPECT_NEAR(d.rate_mean(1), 2.4, 1e-15);
  EXPECT_NEAR(d.rate_var(1), 0.64, 1e-15);
}

TEST(DerivedMoments, QuadraticRateVariance) {
  ParameterSet p;
  p.growth_means = Eigen::Vector3d(50, 16, -1.5);
  p.growth_cov = Eigen::Matrix3d::Zero();
  p.growth_cov.diagonal() << 25, 1, 0.09;
  const auto d = derived_moments({Kind::Quadratic, Framework::LCSM}, p, sched({0, 1}));
  EXPECT_NEAR(d.rate_var(0), 1.09, 1e-14);
}

TEST(DerivedMoments, ZeroCovarianceGivesPlugInRates) {
  Philox rng(2, 0);
  const Schedule s = sched({0, 0.8, 2.1, 2.9});
  for (const auto& form : fixtures::all_forms()) {
    ParameterSet p = fixtures::random_params(form.kind(), 4, rng);
    p.growth_cov.setZero();
    const auto d = derived_moments(form, p, s);
    EXPECT_TRUE((d.rate_var.array() == 0).all());
    EXPECT_TRUE((d.interval_change_var.array() == 0).all());
    EXPECT_TRUE((d.cfb_var.array() == 0).all());
    if (form.framework() == Framework::LCSM && form.parametric())
      for (int m = 0; m < 3; ++m)
        EXPECT_NEAR(d.rate_mean(m),
                    instantaneous_rate(form, p.growth_means, p, s.midpoints()(m)), 1e-12);
  }
}

TEST(DerivedMoments, InvariantsHoldForAllForms) {
  Philox rng(4, 0);
  const Schedule s = sched({0.2, 1.1, 1.8, 3.0, 4.2});
  for (const auto& form : fixtures::all_forms()) {
    const ParameterSet p = fixtures::random_params(form.kind(), 5, rng);
    const auto d = derived_moments(form, p, s);
    double running = 0.0;
    for (int m = 0; m < d.intervals(); ++m) {
      const double dt = s.lengths()(m);
      EXPECT_EQ(d.interval_change_mean(m), d.rate_mean(m) * dt);
      EXPECT_NEAR(d.interval_change_var(m), d.rate_var(m) * dt * dt, 1e-12);
      running += d.interval_change_mean(m);
      EXPECT_EQ(d.cfb_mean(m), running);
      EXPECT_GE(d.rate_var(m), 0.0);
      EXPECT_GE(d.cfb_var(m), 0.0);
    }
  }
}

TEST(DerivedMoments, ChangeFromBaselineVarianceMatchesClosedForms) {
  Philox rng(6, 0);
  const std::vector<double> t = {0.1, 0.9, 2.2, 3.1, 3.8};
  Eigen::VectorXd tv(5);
  for (int j = 0; j < 5; ++j) tv(j) = t[j];
  const Schedule s(tv);
  for (Kind kind :
       {Kind::Nonparametric, Kind::Quadratic, Kind::NegativeExponential, Kind::JenssBayley}) {
    const ParameterSet p = fixtures::random_params(kind, 5, rng);
    const auto d = derived_moments({kind, Framework::LCSM}, p, s);
    const Eigen::MatrixXd& P = p.growth_cov;
    for (int j = 1; j < 5; ++j) {
      double expected = 0.0;
      if (kind == Kind::Nonparametric) {
        double a = 0.0;
        for (int m = 1; m <= j; ++m) a += p.gamma(m - 1) * (t[m] - t[m - 1]);
        expected = P(1, 1) * a * a;
      } else if (kind == Kind::Quadratic) {
        const double a = t[j] - t[0], b = t[j] * t[j] - t[0] * t[0];
        expected = P(1, 1) * a * a + P(2, 2) * b * b + 2 * P(1, 2) * a * b;
      } else if (kind == Kind::NegativeExponential) {
        double a = 0.0;
        for (int m = 1; m <= j; ++m)
          a += p.b * std::exp(-p.b * (t[m] + t[m - 1]) / 2) * (t[m] - t[m - 1]);
        expected = P(1, 1) * a * a;
      } else {
        const double a = t[j] - t[0];
        double b = 0.0;
        for (int m = 1; m <= j; ++m)
          b += p.c * std::exp(p.c * (t[m] + t[m - 1]) / 2) * (t[m] - t[m - 1]);
        expected = P(1, 1) * a * a + P(2, 2) * b * b + 2 * P(1, 2) * a * b;
      }
      EXPECT_NEAR(d.cfb_var(j - 1), expected, 1e-10 * (1 + expected)) << kind_name(kind);
    }
  }
}

TEST(DerivedMoments, QuadraticChangeFromOrigin) {
  ParameterSet p;
  p.growth_means = Eigen::Vector3d(50, 16, -1.5);
  p.growth_cov = Eigen::Matrix3d::Identity();
  const Schedule s = sched({0.0, 0.75, 1.5, 2.6, 4.0});
  const auto d = derived_moments({Kind::Quadratic, Framework::LCSM}, p, s);
  for (int j = 1; j < 5; ++j) {
    const double t = s.times()(j);
    EXPECT_NEAR(d.cfb_mean(j - 1), 16 * t - 1.5 * t * t, 1e-12);
  }
}

TEST(DerivedMomentsCheck, SamplingOracleAgrees) {
  const SimulationDesign jb = preset_design("jb-n500-w10u-r1-s25");
  const Schedule s(jb.wave_times);
  EXPECT_LT(derived_moments_mc_check({Kind::JenssBayley, Framework::LCSM}, jb.truth(), s, 1000000,
                                     1),
            0.01);
  const SimulationDesign np = preset_design("lbgm-n500-w10u-r1-dec");
  EXPECT_LT(derived_moments_mc_check({Kind::Nonparametric, Framework::LCSM}, np.truth(),
                                     Schedule(np.wave_times), 200000, 2),
            0.01);
  ParameterSet degenerate = jb.truth();
  degenerate.growth_cov.setZero();
  EXPECT_EQ(derived_moments_mc_check({Kind::JenssBayley, Framework::LGCM}, degenerate, s, 100000, 3),
            0.0);
  EXPECT_THROW(derived_moments_mc_check({Kind::JenssBayley, Framework::LGCM}, degenerate, s, 10, 3),
               ModelError);
}

TEST(DerivedStandardErrors, FirstRateEqualsSlopeMeanStandardError) {
  const SimulationDesign d = preset_design("lbgm-n200-w6-r1-dec");
  const GeneratedData data = generate_dataset(d, 0);
  const FunctionalForm form(Kind::Nonparametric, Framework::LCSM);
  const FitResult r = fit(form, data.sample);
  ASSERT_EQ(r.status, FitStatus::Converged);
  const Schedule ref(data.sample.wave_mean_times());
  const DerivedChange se = derived_standard_errors(form, r, ref);
  EXPECT_NEAR(se.rate_mean(0), r.se(1), 1e-6 * r.se(1));
  EXPECT_NEAR(se.rate_var(0), r.se(4), 1e-6 * r.se(4));
  EXPECT_TRUE((se.cfb_mean.array() > 0).all());
}

TEST(FactorScores, ZeroCovarianceShrinksToTheMean) {
  Philox rng(8, 0);
  const FunctionalForm form(Kind::Quadratic, Framework::LGCM);
  ParameterSet p = fixtures::random_params(form.kind(), 4, rng);
  p.growth_cov.setZero();
  const LongitudinalSample s(fixtures::ids(5), fixtures::random_outcomes(5, 4, rng),
                             fixtures::random_times(5, 4, rng));
  const FactorScores fs = factor_scores(form, p, s);
  for (const auto& ind : fs.individuals)
    EXPECT_LT((ind.eta_hat - p.growth_means).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FactorScores, NoiselessDataRecoverGeneratingFactors) {
  for (const char* name : {"quad-n200-w6-r1", "exp-n200-w10-r1-b04", "jb-n200-w10u-r1-s25"}) {
    SimulationDesign d = preset_design(name);
    d.residual_var = 1e-8;
    const GeneratedData data = generate_dataset(d, 0);
    ParameterSet truth = d.truth();
    truth.residual_var = 1e-8;
    const FactorScores fs = factor_scores(d.generating_form(), truth, data.sample);
    EXPECT_LT((fs.eta_matrix() - data.factors).cwiseAbs().maxCoeff(), 1e-2) << name;
  }
}

TEST(FactorScores, IdentitiesHoldExactly) {
  Philox rng(10, 0);
  for (const auto& form : fixtures::all_forms()) {
    const ParameterSet p = fixtures::random_params(form.kind(), 5, rng);
    Eigen::MatrixXd y = fixtures::random_outcomes(6, 5, rng);
    y(2, 3) = std::numeric_limits<double>::quiet_NaN();
    const LongitudinalSample s(fixtures::ids(6), y, fixtures::random_times(6, 5, rng));
    const FactorScores fs = factor_scores(form, p, s);
    for (const auto& ind : fs.individuals) {
      double cum = 0.0;
      EXPECT_EQ(ind.cfb_hat(0), 0.0);
      for (int j = 1; j < 5; ++j) {
        cum += ind.interval_change_hat(j - 1);
        EXPECT_EQ(ind.cfb_hat(j), cum);
      }
      for (int j = 0; j < 5; ++j) EXPECT_EQ(ind.true_score_hat(j), ind.eta_hat(0) + ind.cfb_hat(j));
      EXPECT_NEAR(ind.true_score_hat(4) - ind.true_score_hat(0), ind.cfb_hat(4), 1e-12);
    }
  }
}

TEST(FactorScores, AverageApproachesEstimatedMeans) {
  SimulationDesign d = preset_design("exp-n500-w6-r1-b04");
  d.n = 5000;
  const GeneratedData data = generate_dataset(d, 0);
  const FunctionalForm form(Kind::NegativeExponential, Framework::LGCM);
  const FitResult r = fit(form, data.sample);
  ASSERT_EQ(r.status, FitStatus::Converged);
  const Eigen::MatrixXd eta = factor_scores(form, r, data.sample).eta_matrix();
  const Eigen::RowVectorXd mean = eta.colwise().mean();
  for (Eigen::Index c = 0; c < eta.cols(); ++c) {
    const double sd = std::sqrt((eta.col(c).array() - mean(c)).square().sum() / (eta.rows() - 1));
    EXPECT_LT(std::abs(mean(c) - r.params.growth_means(c)), 3 * sd / std::sqrt(5000.0));
  }
  FitResult unconverged = r;
  unconverged.status = FitStatus::RetriesExhausted;
  EXPECT_THROW(factor_scores(form, unconverged, data.sample), ModelError);
}
