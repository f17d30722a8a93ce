#pragma once

// File formats: wide CSV datasets, JSON fit reports and simulation designs,
// CSV exports of derived change curves and factor scores, and the printed
// estimates table.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lcsm/derived.hpp"
#include "lcsm/estimation.hpp"
#include "lcsm/likelihood.hpp"
#include "lcsm/model.hpp"
#include "lcsm/simulation.hpp"

#ifndef LCSM_VERSION
#define LCSM_VERSION "0.0.0"
#endif

namespace lcsm {

using json = nlohmann::json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Wide CSV

struct LoadedSample {
  LongitudinalSample sample;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t");
  return std::string(s.substr(a, b - a + 1));
}

/// NaN for an empty cell or NA; throws on anything that is not a number.
inline double parse_cell(const std::string& raw, std::size_t line, const std::string& column) {
  const std::string s = trim(raw);
  if (s.empty() || s == "NA") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw FormatError("line " + std::to_string(line) + ", column " + column +
                      ": non-numeric value '" + s + "'");
  return v;
}

}  // namespace detail

/// Parses a wide CSV stream with header id,y1..yJ,t1..tJ.
inline LoadedSample read_wide_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty file: missing header");
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  if (header.size() < 5 || header.size() % 2 == 0 || header[0] != "id")
    throw FormatError("malformed header: expected id,y1..yJ,t1..tJ");
  const std::size_t J = (header.size() - 1) / 2;
  for (std::size_t j = 0; j < J; ++j) {
    if (header[1 + j] != "y" + std::to_string(j + 1) ||
        header[1 + J + j] != "t" + std::to_string(j + 1))
      throw FormatError("malformed header: expected id,y1..y" + std::to_string(J) + ",t1..t" +
                        std::to_string(J));
  }

  std::vector<std::string> ids;
  std::vector<std::vector<double>> ys, ts;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    const std::string id = detail::trim(cells[0]);
    if (id.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty id");
    std::vector<double> y(J), t(J);
    for (std::size_t j = 0; j < J; ++j) {
      y[j] = detail::parse_cell(cells[1 + j], lineno, header[1 + j]);
      t[j] = detail::parse_cell(cells[1 + J + j], lineno, header[1 + J + j]);
      if (!std::isnan(y[j]) && std::isnan(t[j]))
        throw FormatError("line " + std::to_string(lineno) + ": y" + std::to_string(j + 1) +
                          " is present but t" + std::to_string(j + 1) + " is missing");
    }
    ids.push_back(id);
    ys.push_back(std::move(y));
    ts.push_back(std::move(t));
  }
  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd Y(n, static_cast<Eigen::Index>(J)), T(n, static_cast<Eigen::Index>(J));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < J; ++j) {
      Y(i, static_cast<Eigen::Index>(j)) = ys[i][j];
      T(i, static_cast<Eigen::Index>(j)) = ts[i][j];
    }
  LongitudinalSample sample(ids, Y, T);
  LoadedSample out{std::move(sample), {}};
  for (const auto& id : out.sample.excluded_ids())
    out.warnings.push_back("individual '" + id + "' has fewer than two observations; excluded");
  return out;
}

inline LoadedSample load_sample(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read '" + path + "'");
  return read_wide_csv(in);
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Writes outcomes and times in the wide CSV layout (missing as NA).
inline void write_wide_csv(std::ostream& out, const std::vector<std::string>& ids,
                           const Eigen::MatrixXd& outcomes, const Eigen::MatrixXd& times) {
  const Eigen::Index J = outcomes.cols();
  out << "id";
  for (Eigen::Index j = 1; j <= J; ++j) out << ",y" << j;
  for (Eigen::Index j = 1; j <= J; ++j) out << ",t" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < outcomes.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < J; ++j) out << ',' << format_double(outcomes(i, j));
    for (Eigen::Index j = 0; j < J; ++j) out << ',' << format_double(times(i, j));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON helpers (NaN and infinities are stored as null)

namespace detail {

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double get_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw FormatError("expected a number, found " + j.dump());
  return j.get<double>();
}

inline json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline Eigen::VectorXd get_vec(const json& j) {
  if (!j.is_array()) throw FormatError("expected an array, found " + j.dump());
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(j[i]);
  return v;
}

inline json mat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

inline Eigen::MatrixXd get_mat(const json& j) {
  if (!j.is_array()) throw FormatError("expected a matrix, found " + j.dump());
  if (j.empty()) return {};
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = get_vec(j[static_cast<std::size_t>(r)]);
    if (row.size() != cols) throw FormatError("ragged matrix");
    m.row(r) = row.transpose();
  }
  return m;
}

inline bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

inline bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (!same(a.data()[i], b.data()[i])) return false;
  return true;
}

inline const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace detail

inline json to_json(const ParameterSet& p) {
  return {{"growth_means", detail::vec(p.growth_means)},
          {"growth_cov", detail::mat(p.growth_cov)},
          {"residual_var", detail::num(p.residual_var)},
          {"gamma", detail::vec(p.gamma)},
          {"b", detail::num(p.b)},
          {"c", detail::num(p.c)}};
}

inline ParameterSet parameter_set_from_json(const json& j) {
  ParameterSet p;
  p.growth_means = detail::get_vec(detail::field(j, "growth_means"));
  p.growth_cov = detail::get_mat(detail::field(j, "growth_cov"));
  p.residual_var = detail::get_num(detail::field(j, "residual_var"));
  if (j.contains("gamma")) p.gamma = detail::get_vec(j.at("gamma"));
  if (j.contains("b")) p.b = detail::get_num(j.at("b"));
  if (j.contains("c")) p.c = detail::get_num(j.at("c"));
  return p;
}

inline json to_json(const DerivedChange& d) {
  return {{"evaluated_at", detail::vec(d.evaluated_at.times())},
          {"rate_mean", detail::vec(d.rate_mean)},
          {"rate_var", detail::vec(d.rate_var)},
          {"interval_change_mean", detail::vec(d.interval_change_mean)},
          {"interval_change_var", detail::vec(d.interval_change_var)},
          {"cfb_mean", detail::vec(d.cfb_mean)},
          {"cfb_var", detail::vec(d.cfb_var)}};
}

inline DerivedChange derived_change_from_json(const json& j) {
  DerivedChange d;
  d.evaluated_at = Schedule(detail::get_vec(detail::field(j, "evaluated_at")));
  d.rate_mean = detail::get_vec(detail::field(j, "rate_mean"));
  d.rate_var = detail::get_vec(detail::field(j, "rate_var"));
  d.interval_change_mean = detail::get_vec(detail::field(j, "interval_change_mean"));
  d.interval_change_var = detail::get_vec(detail::field(j, "interval_change_var"));
  d.cfb_mean = detail::get_vec(detail::field(j, "cfb_mean"));
  d.cfb_var = detail::get_vec(detail::field(j, "cfb_var"));
  return d;
}

inline bool same_derived(const DerivedChange& a, const DerivedChange& b) {
  using detail::same;
  return same(a.evaluated_at.times(), b.evaluated_at.times()) && same(a.rate_mean, b.rate_mean) &&
         same(a.rate_var, b.rate_var) && same(a.interval_change_mean, b.interval_change_mean) &&
         same(a.interval_change_var, b.interval_change_var) && same(a.cfb_mean, b.cfb_mean) &&
         same(a.cfb_var, b.cfb_var);
}

// ---------------------------------------------------------------------------
// Fit reports

inline constexpr int kReportSchemaVersion = 1;

struct RunReport {
  int schema_version = kReportSchemaVersion;
  std::string software = "lcsm";
  std::string version = LCSM_VERSION;
  Kind kind = Kind::Quadratic;
  Framework framework = Framework::LCSM;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  std::string data_path;
  int excluded = 0;
  Eigen::VectorXd wave_mean_times;
  FitResult fit;
  std::optional<DerivedChange> derived;     // at the wave-mean schedule
  std::optional<DerivedChange> derived_se;  // delta-method standard errors

  FunctionalForm form() const { return FunctionalForm(kind, framework); }
};

inline json to_json(const RunReport& r) {
  const FitResult& f = r.fit;
  json fit = {{"params", to_json(f.params)},
              {"names", f.names},
              {"estimates", detail::vec(f.estimates)},
              {"se", detail::vec(f.se)},
              {"wald_p", detail::vec(f.wald_p)},
              {"cov", detail::mat(f.cov)},
              {"minus2ll", detail::num(f.minus2ll)},
              {"aic", detail::num(f.aic)},
              {"bic", detail::num(f.bic)},
              {"n_free", f.n_free},
              {"n", f.n},
              {"status", std::string(status_name(f.status))},
              {"n_retries_used", f.n_retries_used},
              {"iterations", f.iterations},
              {"gradient_norm", detail::num(f.gradient_norm)},
              {"message", f.message}};
  return {{"schema_version", r.schema_version},
          {"software", r.software},
          {"version", r.version},
          {"model", {{"form", std::string(kind_name(r.kind))},
                     {"framework", std::string(framework_name(r.framework))}}},
          {"seed", r.seed},
          {"wall_time_s", detail::num(r.wall_time_s)},
          {"data_path", r.data_path},
          {"excluded", r.excluded},
          {"wave_mean_times", detail::vec(r.wave_mean_times)},
          {"fit", fit},
          {"derived", r.derived ? to_json(*r.derived) : json(nullptr)},
          {"derived_se", r.derived_se ? to_json(*r.derived_se) : json(nullptr)}};
}

inline RunReport report_from_json(const json& j) {
  using namespace detail;
  RunReport r;
  r.schema_version = field(j, "schema_version").get<int>();
  if (r.schema_version != kReportSchemaVersion)
    throw FormatError("unsupported report schema version " + std::to_string(r.schema_version));
  r.software = field(j, "software").get<std::string>();
  r.version = field(j, "version").get<std::string>();
  const json& model = field(j, "model");
  const auto kind = parse_kind(field(model, "form").get<std::string>());
  const auto framework = parse_framework(field(model, "framework").get<std::string>());
  if (!kind || !framework) throw FormatError("unknown model in report");
  r.kind = *kind;
  r.framework = *framework;
  r.seed = field(j, "seed").get<std::uint64_t>();
  r.wall_time_s = get_num(field(j, "wall_time_s"));
  r.data_path = field(j, "data_path").get<std::string>();
  r.excluded = field(j, "excluded").get<int>();
  r.wave_mean_times = get_vec(field(j, "wave_mean_times"));
  const json& fj = field(j, "fit");
  FitResult& f = r.fit;
  f.params = parameter_set_from_json(field(fj, "params"));
  f.names = field(fj, "names").get<std::vector<std::string>>();
  f.estimates = get_vec(field(fj, "estimates"));
  f.se = get_vec(field(fj, "se"));
  f.wald_p = get_vec(field(fj, "wald_p"));
  f.cov = get_mat(field(fj, "cov"));
  f.minus2ll = get_num(field(fj, "minus2ll"));
  f.aic = get_num(field(fj, "aic"));
  f.bic = get_num(field(fj, "bic"));
  f.n_free = field(fj, "n_free").get<int>();
  f.n = field(fj, "n").get<int>();
  const auto status = parse_status(field(fj, "status").get<std::string>());
  if (!status) throw FormatError("unknown fit status");
  f.status = *status;
  f.n_retries_used = field(fj, "n_retries_used").get<int>();
  f.iterations = field(fj, "iterations").get<int>();
  f.gradient_norm = get_num(field(fj, "gradient_norm"));
  f.message = field(fj, "message").get<std::string>();
  if (j.contains("derived") && !j.at("derived").is_null())
    r.derived = derived_change_from_json(j.at("derived"));
  if (j.contains("derived_se") && !j.at("derived_se").is_null())
    r.derived_se = derived_change_from_json(j.at("derived_se"));
  return r;
}

inline bool operator==(const RunReport& a, const RunReport& b) {
  using detail::same;
  const FitResult &x = a.fit, &y = b.fit;
  auto same_opt = [](const std::optional<DerivedChange>& p, const std::optional<DerivedChange>& q) {
    return p.has_value() == q.has_value() && (!p || same_derived(*p, *q));
  };
  const bool params_equal =
      same(x.params.growth_means, y.params.growth_means) &&
      same(x.params.growth_cov, y.params.growth_cov) &&
      same(x.params.residual_var, y.params.residual_var) && same(x.params.gamma, y.params.gamma) &&
      same(x.params.b, y.params.b) && same(x.params.c, y.params.c);
  return a.schema_version == b.schema_version && a.software == b.software &&
         a.version == b.version && a.kind == b.kind && a.framework == b.framework &&
         a.seed == b.seed && same(a.wall_time_s, b.wall_time_s) && a.data_path == b.data_path &&
         a.excluded == b.excluded && same(a.wave_mean_times, b.wave_mean_times) && params_equal &&
         x.names == y.names && same(x.estimates, y.estimates) && same(x.se, y.se) &&
         same(x.wald_p, y.wald_p) && same(x.cov, y.cov) && same(x.minus2ll, y.minus2ll) &&
         same(x.aic, y.aic) && same(x.bic, y.bic) && x.n_free == y.n_free && x.n == y.n &&
         x.status == y.status && x.n_retries_used == y.n_retries_used &&
         x.iterations == y.iterations && same(x.gradient_norm, y.gradient_norm) &&
         x.message == y.message && same_opt(a.derived, b.derived) &&
         same_opt(a.derived_se, b.derived_se);
}

inline std::string serialize(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

inline RunReport parse_report(std::string_view text) {
  try {
    return report_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid report: ") + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << content;
  if (!out) throw FormatError("error writing '" + path + "'");
}

/// Starting values: either a bare parameter-set object or a report, whose
/// estimates are used.
inline ParameterSet load_start(const std::string& path) {
  try {
    const json j = json::parse(read_file(path));
    if (j.contains("fit")) return parameter_set_from_json(j.at("fit").at("params"));
    return parameter_set_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError("invalid start file '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Simulation designs

inline json to_json(const SimulationDesign& d) {
  return {{"name", d.name},
          {"kind", std::string(kind_name(d.kind))},
          {"n", d.n},
          {"wave_times", detail::vec(d.wave_times)},
          {"jitter", d.jitter},
          {"jitter_first_wave", d.jitter_first_wave},
          {"rho", d.rho},
          {"factor_means", detail::vec(d.factor_means)},
          {"factor_sds", detail::vec(d.factor_sds)},
          {"residual_var", d.residual_var},
          {"gamma", detail::vec(d.gamma)},
          {"b", d.b},
          {"c", d.c},
          {"replications", d.replications},
          {"seed", d.seed}};
}

/// Reads a design object. A "preset" field starts from that named condition;
/// any other field present overrides it.
inline SimulationDesign design_from_json(const json& j) {
  using namespace detail;
  try {
    SimulationDesign d;
    if (j.contains("preset")) {
      d = preset_design(j.at("preset").get<std::string>());
    } else {
      const auto kind = parse_kind(field(j, "kind").get<std::string>());
      if (!kind) throw FormatError("unknown design kind");
      d.kind = *kind;
    }
    if (j.contains("name")) d.name = j.at("name").get<std::string>();
    if (j.contains("kind")) {
      const auto kind = parse_kind(j.at("kind").get<std::string>());
      if (!kind) throw FormatError("unknown design kind");
      d.kind = *kind;
    }
    if (j.contains("n")) d.n = j.at("n").get<int>();
    if (j.contains("wave_times")) d.wave_times = get_vec(j.at("wave_times"));
    if (j.contains("jitter")) d.jitter = get_num(j.at("jitter"));
    if (j.contains("jitter_first_wave")) d.jitter_first_wave = j.at("jitter_first_wave").get<bool>();
    if (j.contains("rho")) d.rho = get_num(j.at("rho"));
    if (j.contains("factor_means")) d.factor_means = get_vec(j.at("factor_means"));
    if (j.contains("factor_sds")) d.factor_sds = get_vec(j.at("factor_sds"));
    if (j.contains("residual_var")) d.residual_var = get_num(j.at("residual_var"));
    if (j.contains("gamma")) d.gamma = get_vec(j.at("gamma"));
    if (j.contains("b")) d.b = get_num(j.at("b"));
    if (j.contains("c")) d.c = get_num(j.at("c"));
    if (j.contains("replications")) d.replications = j.at("replications").get<int>();
    if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
    if (d.kind != Kind::Nonparametric) d.gamma.resize(0);
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid design: ") + e.what());
  }
}

inline json to_json(const StudyResult& r, const SimulationDesign& design) {
  json summaries = json::array();
  for (const auto& s : r.summaries) {
    json params = json::array();
    for (const auto& p : s.parameters)
      params.push_back({{"name", p.name},
                        {"truth", detail::num(p.truth)},
                        {"mean_estimate", detail::num(p.mean_estimate)},
                        {"relative_bias", detail::num(p.relative_bias)},
                        {"empirical_se", detail::num(p.empirical_se)},
                        {"relative_rmse", detail::num(p.relative_rmse)},
                        {"coverage", detail::num(p.coverage)},
                        {"mc_se_bias", detail::num(p.mc_se_bias)}});
    summaries.push_back({{"form", std::string(kind_name(s.form.kind()))},
                         {"framework", std::string(framework_name(s.form.framework()))},
                         {"convergence_rate", detail::num(s.convergence_rate)},
                         {"converged", s.converged},
                         {"retained", s.retained},
                         {"parameters", params}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"software", "lcsm"},
          {"version", LCSM_VERSION},
          {"design", to_json(design)},
          {"requested", r.requested},
          {"attempted", r.attempted},
          {"discarded", r.discarded},
          {"structural_failures", r.structural_failures},
          {"summaries", summaries}};
}

/// One row per replication and fitted framework.
inline void write_replications_csv(std::ostream& out, const StudyResult& r) {
  out << "rep,framework,status,retained,n_retries_used,minus2ll,parameter,estimate,se\n";
  for (const auto& rec : r.records) {
    for (Eigen::Index p = 0; p < rec.estimates.size(); ++p) {
      out << rec.rep_index << ',' << framework_name(rec.framework) << ','
          << status_name(rec.status) << ',' << (rec.retained ? 1 : 0) << ','
          << rec.n_retries_used << ',' << format_double(rec.minus2ll) << ',' << p << ','
          << format_double(rec.estimates(p)) << ',' << format_double(rec.se(p)) << '\n';
    }
    if (rec.estimates.size() == 0)
      out << rec.rep_index << ',' << framework_name(rec.framework) << ','
          << status_name(rec.status) << ',' << (rec.retained ? 1 : 0) << ','
          << rec.n_retries_used << ",NA,NA,NA,NA\n";
  }
}

// ---------------------------------------------------------------------------
// Curves and scores

/// One row per interval: wave is the interval's closing wave (1-based),
/// t_ref its time on the reference schedule.
inline void write_curves_csv(std::ostream& out, const DerivedChange& d,
                             const std::string& id = {}) {
  const bool with_id = !id.empty();
  const auto& t = d.evaluated_at.times();
  for (int m = 0; m < d.intervals(); ++m) {
    if (with_id) out << id << ',';
    out << (m + 2) << ',' << format_double(t(m + 1)) << ',' << format_double(d.cfb_mean(m)) << ','
        << format_double(d.cfb_var(m)) << ',' << (m + 1) << ',' << format_double(d.rate_mean(m))
        << ',' << format_double(d.rate_var(m)) << ',' << format_double(d.interval_change_mean(m))
        << ',' << format_double(d.interval_change_var(m)) << '\n';
  }
}

inline const char* kCurvesHeader =
    "wave,t_ref,cfb_mean,cfb_var,interval,rate_mean,rate_var,change_mean,change_var";

inline void write_scores_csv(std::ostream& out, const FactorScores& scores) {
  if (scores.size() == 0) return;
  const auto k = scores[0].eta_hat.size();
  const auto J = scores[0].cfb_hat.size();
  out << "id";
  for (Eigen::Index c = 0; c < k; ++c) out << ",eta" << c;
  for (Eigen::Index m = 1; m < J; ++m) out << ",rate" << m;
  for (Eigen::Index m = 1; m < J; ++m) out << ",change" << m;
  for (Eigen::Index j = 1; j <= J; ++j) out << ",cfb" << j;
  for (Eigen::Index j = 1; j <= J; ++j) out << ",true" << j;
  out << '\n';
  for (const auto& s : scores.individuals) {
    out << s.id;
    auto put = [&](const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
    };
    put(s.eta_hat);
    put(s.rate_hat);
    put(s.interval_change_hat);
    put(s.cfb_hat);
    put(s.true_score_hat);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Printed estimates table

inline std::string fixed3(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string format_p(double p) {
  if (!std::isfinite(p)) return "NA";
  if (p < 0.001) return "<0.001";
  return fixed3(p);
}

inline std::string estimates_table(const RunReport& r) {
  const FitResult& f = r.fit;
  std::ostringstream out;
  out << r.form().label() << "  status " << status_name(f.status) << "  n " << f.n
      << "  free " << f.n_free << '\n';
  out << "-2ll " << fixed3(f.minus2ll) << "  AIC " << fixed3(f.aic) << "  BIC " << fixed3(f.bic)
      << '\n';
  out << std::left << std::setw(14) << "parameter" << std::right << std::setw(12) << "estimate"
      << std::setw(10) << "SE" << std::setw(10) << "p" << '\n';
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    out << std::left << std::setw(14) << f.names[i] << std::right << std::setw(12)
        << fixed3(f.estimates(e)) << std::setw(10) << fixed3(f.se(e)) << std::setw(10)
        << format_p(f.wald_p(e)) << '\n';
  }
  if (r.derived) {
    const DerivedChange& d = *r.derived;
    out << "\nchange at wave-mean times\n";
    out << std::left << std::setw(8) << "wave" << std::right << std::setw(12) << "rate"
        << std::setw(12) << "rate var" << std::setw(12) << "cfb" << std::setw(12) << "cfb var"
        << '\n';
    for (int m = 0; m < d.intervals(); ++m)
      out << std::left << std::setw(8) << (m + 2) << std::right << std::setw(12)
          << fixed3(d.rate_mean(m)) << std::setw(12) << fixed3(d.rate_var(m)) << std::setw(12)
          << fixed3(d.cfb_mean(m)) << std::setw(12) << fixed3(d.cfb_var(m)) << '\n';
  }
  return out.str();
}

}  // namespace lcsm
