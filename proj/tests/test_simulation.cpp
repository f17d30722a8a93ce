#include <cmath>

#include <gtest/gtest.h>

#include "lcsm/random.hpp"
#include "lcsm/simulation.hpp"

using namespace lcsm;

TEST(Philox, KnownAnswerVectors) {
  EXPECT_EQ(Philox::generate({0, 0, 0, 0}, {0, 0}),
            (Philox::Block{0x16554d9eca36314cULL, 0xdb20fe9d672d0fdcULL, 0xd7e772cee186176bULL,
                           0x7e68b68aec7ba23bULL}));
  EXPECT_EQ(Philox::generate({6, 0, 0, 7}, {123456789, 42}),
            (Philox::Block{0x422276b59e162301ULL, 0xf96ee97be19cc52eULL, 0xc30ca716f1fb87c7ULL,
                           0x205a38acd287bb8bULL}));
  EXPECT_EQ(Philox::generate({7, 0, 0, 7}, {123456789, 42}),
            (Philox::Block{0xa2622d898f93ff6aULL, 0xccdfc6af75e823ecULL, 0x44706402319de846ULL,
                           0x0f09b2436211358fULL}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  Philox a(5, 1), b(5, 1), c(5, 2), d(6, 1);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    EXPECT_NE(x, d());
  }
  Philox first(0, 0);
  EXPECT_EQ(first(), 0x16554d9eca36314cULL);
}

TEST(Presets, DocumentedLatentBasisCondition) {
  const SimulationDesign d = preset_design("lbgm-n500-w10u-r1-dec");
  EXPECT_EQ(d.kind, Kind::Nonparametric);
  EXPECT_EQ(d.n, 500);
  Eigen::VectorXd t(10);
  t << 0, 0.75, 1.5, 2.25, 3, 3.75, 4.5, 6, 7.5, 9;
  EXPECT_EQ(d.wave_times, t);
  EXPECT_EQ(d.residual_var, 1.0);
  EXPECT_EQ(d.jitter, 0.25);
  EXPECT_EQ(d.rho, 0.3);
  EXPECT_EQ(d.factor_means, Eigen::Vector2d(50, 3));
  EXPECT_EQ(d.factor_sds, Eigen::Vector2d(5, 1));
  Eigen::VectorXd g(9);
  g << 1, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2;
  EXPECT_LT((d.gamma - g).cwiseAbs().maxCoeff(), 1e-15);
  const ParameterSet p = d.truth();
  EXPECT_NEAR(p.growth_cov(0, 1), 0.3 * 5 * 1, 1e-15);
}

TEST(Presets, OtherConditions) {
  const auto inc6 = preset_design("lbgm-n200-w6-r2-inc");
  Eigen::VectorXd g(5);
  g << 1, 1.2, 1.4, 1.6, 1.8;
  EXPECT_LT((inc6.gamma - g).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(inc6.residual_var, 2.0);
  EXPECT_EQ(preset_design("quad-n200-w6-r1").factor_means, Eigen::Vector3d(50, 16, -1.5));
  EXPECT_EQ(preset_design("quad-n200-w10-r1").factor_means, Eigen::Vector3d(50, 20, -1.0));
  EXPECT_NEAR(preset_design("quad-n500-w10u-r1").factor_cov()(2, 2), 0.09, 1e-15);
  EXPECT_EQ(preset_design("exp-n500-w6-r1-b08").b, 0.8);
  EXPECT_EQ(preset_design("exp-n500-w6-r1-b04").factor_means, Eigen::Vector2d(50, 30));
  const auto jb = preset_design("jb-n500-w10-r1-s10");
  EXPECT_EQ(jb.c, -0.7);
  EXPECT_EQ(jb.factor_means, Eigen::Vector3d(50, 1.0, -30));
  EXPECT_NEAR(jb.factor_cov()(1, 1), 0.16, 1e-15);
  EXPECT_NEAR(jb.factor_cov()(2, 2), 9.0, 1e-15);

  const auto names = preset_names();
  EXPECT_EQ(names.size(), 24u + 12u + 24u + 24u);
  for (const auto& n : names) EXPECT_NO_THROW(preset_design(n)) << n;
  EXPECT_THROW(preset_design("lbgm-n500-w10u-r1"), ModelError);
  EXPECT_THROW(preset_design("quad-n300-w6-r1"), ModelError);
  EXPECT_THROW(preset_design("spline-n200-w6-r1"), ModelError);
}

TEST(Generate, MeasurementWindowsAndDeterminism) {
  const SimulationDesign d = preset_design("quad-n200-w10u-r1");
  const GeneratedData a = generate_dataset(d, 3);
  for (Eigen::Index i = 0; i < a.times.rows(); ++i)
    for (Eigen::Index j = 0; j < a.times.cols(); ++j) {
      EXPECT_GE(a.times(i, j), d.wave_times(j) - 0.25);
      EXPECT_LE(a.times(i, j), d.wave_times(j) + 0.25);
    }
  EXPECT_TRUE((a.times.col(0).array() == 0.0).all());
  const GeneratedData b = generate_dataset(d, 3);
  EXPECT_EQ(a.outcomes, b.outcomes);
  EXPECT_EQ(a.times, b.times);
  EXPECT_NE(a.outcomes, generate_dataset(d, 4).outcomes);

  SimulationDesign jittered = d;
  jittered.jitter_first_wave = true;
  const GeneratedData c = generate_dataset(jittered, 3);
  EXPECT_GT(c.times.col(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE(c.times.col(0).cwiseAbs().maxCoeff(), 0.25);
}

TEST(Generate, FactorCorrelation) {
  SimulationDesign d = preset_design("exp-n500-w6-r1-b04");
  d.n = 100000;
  const GeneratedData g = generate_dataset(d, 0);
  const Eigen::MatrixXd centered = g.factors.rowwise() - g.factors.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (d.n - 1.0);
  EXPECT_NEAR(cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1)), 0.3, 0.01);
}

TEST(Generate, DeterministicCurveWithoutVariation) {
  SimulationDesign d = preset_design("jb-n200-w6-r1-s25");
  d.residual_var = 0.0;
  d.factor_sds.setZero();
  d.n = 20;
  const GeneratedData g = generate_dataset(d, 0);
  const ParameterSet p = d.truth();
  for (Eigen::Index i = 0; i < g.outcomes.rows(); ++i)
    for (Eigen::Index j = 0; j < g.outcomes.cols(); ++j) {
      const double expected = growth_row(Kind::JenssBayley, p, g.times(i, j)).dot(d.factor_means);
      EXPECT_NEAR(g.outcomes(i, j), expected, 1e-12);
    }
}

TEST(Metrics, HandComputedExample) {
  const auto m = performance_metrics("x", 1.0, {0.9, 1.0, 1.1}, {0.1, 0.1, 0.1});
  EXPECT_NEAR(m.relative_bias, 0.0, 1e-15);
  EXPECT_NEAR(m.empirical_se, 0.1, 1e-15);
  EXPECT_NEAR(m.relative_rmse, std::sqrt(0.02 / 3), 1e-15);
  EXPECT_NEAR(m.relative_rmse, 0.08165, 1e-5);
  EXPECT_NEAR(m.mc_se_bias, 0.1 / std::sqrt(3.0), 1e-15);
  EXPECT_EQ(m.coverage, 1.0);

  const auto exact = performance_metrics("y", 2.0, {2.0, 2.0, 2.0, 2.0}, {0.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(exact.relative_bias, 0.0);
  EXPECT_EQ(exact.relative_rmse, 0.0);
  EXPECT_EQ(exact.coverage, 1.0);

  const auto miss = performance_metrics("z", 1.0, {1.5, 1.0}, {0.1, 0.1});
  EXPECT_EQ(miss.coverage, 0.5);
  EXPECT_THROW(performance_metrics("w", 1.0, {1.0}, {}), ModelError);
}

TEST(Study, ReproducibleAcrossRunsAndWorkers) {
  SimulationDesign d = preset_design("quad-n200-w6-r1");
  d.replications = 3;
  d.seed = 2024;
  StudyOptions one;
  one.workers = 1;
  StudyOptions two;
  two.workers = 2;
  const StudyResult a = run_study(d, {Framework::LCSM, Framework::LGCM}, one);
  const StudyResult b = run_study(d, {Framework::LCSM, Framework::LGCM}, two);
  ASSERT_EQ(a.summaries.size(), 2u);
  EXPECT_EQ(a.attempted, b.attempted);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t p = 0; p < a.summaries[s].parameters.size(); ++p) {
      EXPECT_EQ(a.summaries[s].parameters[p].relative_bias,
                b.summaries[s].parameters[p].relative_bias);
      EXPECT_EQ(a.summaries[s].parameters[p].coverage, b.summaries[s].parameters[p].coverage);
    }
  const auto& lcsm = a.summary(Framework::LCSM);
  EXPECT_EQ(lcsm.retained, 3);
  EXPECT_GE(lcsm.convergence_rate, 0.0);
  EXPECT_LE(lcsm.convergence_rate, 1.0);
  EXPECT_EQ(lcsm["mu_eta1"].truth, 16.0);
  EXPECT_EQ(a.records.size(), 2u * a.attempted);
}

TEST(Study, AbortsWhenReplicationsFailStructurally) {
  SimulationDesign d = preset_design("quad-n200-w6-r1");
  d.wave_times = Eigen::Vector3d(0, 1, 2);  // too few waves for a quadratic fit
  d.replications = 5;
  EXPECT_THROW(run_study(d, {Framework::LCSM}), StudyAborted);
  EXPECT_THROW(run_study(preset_design("lbgm-n200-w6-r1-dec"), {Framework::LGCM}), ModelError);
}
