#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "lcsm/io.hpp"

using namespace lcsm;

TEST(WideCsv, MissingCellsAndSchedules) {
  std::istringstream in(
      "id,y1,y2,y3,t1,t2,t3\n"
      "7,50.1,,55.2,0.0,,2.1\n"
      "8,49,NA,53,0,1,2\n"
      "9,48,50,52,0,1.1,2.2\n");
  const LoadedSample s = read_wide_csv(in);
  ASSERT_EQ(s.sample.size(), 3u);
  EXPECT_EQ(s.sample.waves(), 3);
  EXPECT_EQ(s.sample[0].id, "7");
  EXPECT_EQ(s.sample[0].observed, (std::vector<int>{0, 2}));
  EXPECT_DOUBLE_EQ(s.sample[0].y(1), 55.2);
  EXPECT_TRUE(s.warnings.empty());
}

TEST(WideCsv, ExcludesSingleObservationIndividuals) {
  std::istringstream in(
      "id,y1,y2,y3,t1,t2,t3\n"
      "1,50,52,54,0,1,2\n"
      "2,50,,,0,,\n"
      "3,51,52,56,0,1,2\n");
  const LoadedSample s = read_wide_csv(in);
  EXPECT_EQ(s.sample.size(), 2u);
  EXPECT_EQ(s.warnings.size(), 1u);
}

TEST(WideCsv, Errors) {
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return read_wide_csv(in);
  };
  EXPECT_THROW(load(""), FormatError);
  EXPECT_THROW(load("id,y1,y2,t1\n"), FormatError);
  EXPECT_THROW(load("id,y1,y2,t2,t1\n1,1,2,0,1\n"), FormatError);
  EXPECT_THROW(load("id,y1,y2,t1,t2\n1,1,2,0,\n"), FormatError);
  EXPECT_THROW(load("id,y1,y2,t1,t2\n1,1,abc,0,1\n"), FormatError);
  EXPECT_THROW(load("id,y1,y2,t1,t2\n1,1,2,0\n"), FormatError);
}

TEST(WideCsv, ShapeOfApplicationData) {
  std::ostringstream csv;
  Eigen::MatrixXd y(400, 9), t(400, 9);
  std::vector<std::string> ids;
  for (int i = 0; i < 400; ++i) {
    ids.push_back("s" + std::to_string(i));
    for (int j = 0; j < 9; ++j) {
      t(i, j) = 0.5 * j + 0.01 * (i % 7);
      y(i, j) = 30 + 10 * t(i, j) + (i % 5);
    }
  }
  y(3, 4) = std::numeric_limits<double>::quiet_NaN();
  write_wide_csv(csv, ids, y, t);
  std::istringstream in(csv.str());
  const LoadedSample s = read_wide_csv(in);
  EXPECT_EQ(s.sample.size(), 400u);
  EXPECT_EQ(s.sample.waves(), 9);
  EXPECT_EQ(s.sample[3].observed.size(), 8u);
}

namespace {

RunReport sample_report() {
  RunReport r;
  r.kind = Kind::Nonparametric;
  r.framework = Framework::LCSM;
  r.seed = 18446744073709551615ULL;
  r.wall_time_s = 1.2345678901234567;
  r.data_path = "data.csv";
  r.excluded = 2;
  r.wave_mean_times = Eigen::Vector3d(0.0, 1.0 / 3.0, 2.0000000000000004);
  FitResult& f = r.fit;
  f.params.growth_means = Eigen::Vector2d(50.123456789012345, 3.1);
  f.params.growth_cov = Eigen::Matrix2d::Identity() * 0.1;
  f.params.residual_var = 0.7;
  f.params.gamma = Eigen::Vector2d(1.0, 0.8123);
  f.names = {"mu_eta0", "mu_eta1", "psi00", "psi01", "psi11", "gamma2", "theta_eps"};
  f.estimates = Eigen::VectorXd::LinSpaced(7, 0.1, 7.7);
  f.se = Eigen::VectorXd::Constant(7, 1e-300);
  f.wald_p = Eigen::VectorXd::Constant(7, std::numeric_limits<double>::quiet_NaN());
  f.cov = Eigen::MatrixXd::Identity(7, 7) * 3.3;
  f.minus2ll = 1234.5678;
  f.aic = 1248.5678;
  f.bic = std::numeric_limits<double>::quiet_NaN();
  f.n_free = 7;
  f.n = 100;
  f.status = FitStatus::RetriesExhausted;
  f.n_retries_used = 9;
  f.iterations = 42;
  f.gradient_norm = 1e-9;
  f.message = "gradient tolerance \"not\" met";
  const Schedule sch(r.wave_mean_times);
  r.derived = derived_moments(r.form(), f.params, sch);
  return r;
}

}  // namespace

TEST(Report, RoundTripIsLossless) {
  const RunReport r = sample_report();
  const std::string text = serialize(r);
  const RunReport back = parse_report(text);
  EXPECT_TRUE(back == r);
  EXPECT_EQ(serialize(back), text);
  EXPECT_FALSE(back.derived_se.has_value());
  EXPECT_NE(text.find("\"schema_version\": 1"), std::string::npos);
  EXPECT_NE(text.find("\"bic\": null"), std::string::npos);

  RunReport changed = r;
  changed.fit.estimates(3) = std::nextafter(changed.fit.estimates(3), 10.0);
  EXPECT_FALSE(changed == r);
}

TEST(Report, RejectsUnknownSchemaAndGarbage) {
  json j = to_json(sample_report());
  j["schema_version"] = 99;
  EXPECT_THROW(report_from_json(j), FormatError);
  EXPECT_THROW(parse_report("{not json"), FormatError);
  EXPECT_THROW(parse_report("{}"), FormatError);
}

TEST(Report, TableMatchesJsonToPrintedPrecision) {
  RunReport r = sample_report();
  r.fit.se.setConstant(0.25);
  r.fit.wald_p.setConstant(0.0123);
  const std::string table = estimates_table(r);
  for (Eigen::Index i = 0; i < r.fit.estimates.size(); ++i)
    EXPECT_NE(table.find(fixed3(r.fit.estimates(i))), std::string::npos);
  EXPECT_NE(table.find("1234.568"), std::string::npos);
  EXPECT_NE(table.find("0.012"), std::string::npos);
  EXPECT_NE(table.find("gamma2"), std::string::npos);
}

TEST(Design, JsonRoundTripAndOverrides) {
  const SimulationDesign d = preset_design("jb-n500-w10u-r1-s25");
  const SimulationDesign back = design_from_json(to_json(d));
  EXPECT_EQ(to_json(back), to_json(d));

  const SimulationDesign o = design_from_json(
      json::parse(R"({"preset": "lbgm-n500-w10u-r1-dec", "factor_means": [50, 5], "seed": 7})"));
  EXPECT_EQ(o.factor_means(1), 5.0);
  EXPECT_EQ(o.seed, 7u);
  EXPECT_EQ(o.n, 500);

  EXPECT_THROW(design_from_json(json::parse(R"({"preset": "lbgm-n500-w10u-r1-dec", "n": 0})")),
               ModelError);
  EXPECT_THROW(design_from_json(json::parse(R"({"kind": "spline"})")), FormatError);
}

TEST(Curves, ColumnsAndTelescoping) {
  const RunReport r = sample_report();
  std::ostringstream out;
  out << kCurvesHeader << '\n';
  write_curves_csv(out, *r.derived);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "wave,t_ref,cfb_mean,cfb_var,interval,rate_mean,rate_var,change_mean,change_var");
  double cum = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 9u);
    cum += v[7];
    EXPECT_NEAR(v[2], cum, 1e-12);
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}
