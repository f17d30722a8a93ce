#pragma once

// Monte Carlo simulation studies: design grid, data generation with
// individually varying measurement occasions, and performance metrics
// (relative bias, empirical SE, relative RMSE, Wald coverage).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lcsm/estimation.hpp"
#include "lcsm/likelihood.hpp"
#include "lcsm/model.hpp"
#include "lcsm/parallel.hpp"
#include "lcsm/random.hpp"

namespace lcsm {

enum class WaveGrid { Equal6, Equal10, Unequal10 };

inline Eigen::VectorXd wave_grid_times(WaveGrid grid) {
  Eigen::VectorXd t;
  switch (grid) {
    case WaveGrid::Equal6:
      t.resize(6);
      t << 0, 1, 2, 3, 4, 5;
      break;
    case WaveGrid::Equal10:
      t.resize(10);
      t << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
      break;
    case WaveGrid::Unequal10:
      t.resize(10);
      t << 0, 0.75, 1.5, 2.25, 3.0, 3.75, 4.5, 6.0, 7.5, 9.0;
      break;
  }
  return t;
}

/// One simulation condition. Growth factors are drawn from
/// MVN(factor_means, Psi) with Psi_ij = rho * sd_i * sd_j (i != j).
struct SimulationDesign {
  std::string name;
  Kind kind = Kind::Nonparametric;
  int n = 500;
  Eigen::VectorXd wave_times = wave_grid_times(WaveGrid::Unequal10);
  double jitter = 0.25;
  bool jitter_first_wave = false;
  double rho = 0.3;
  Eigen::VectorXd factor_means;
  Eigen::VectorXd factor_sds;
  double residual_var = 1.0;
  Eigen::VectorXd gamma;  // nonparametric: all J-1 relative rates, gamma(0) == 1
  double b = 0.0;
  double c = 0.0;
  int replications = 1000;
  std::uint64_t seed = 0;

  int waves() const { return static_cast<int>(wave_times.size()); }

  Eigen::MatrixXd factor_cov() const {
    const Eigen::Index k = factor_sds.size();
    Eigen::MatrixXd cov(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j)
        cov(i, j) = (i == j ? 1.0 : rho) * factor_sds(i) * factor_sds(j);
    return cov;
  }

  /// Data-generating form: the change-score loadings for the nonparametric
  /// form, the closed-form growth curve otherwise.
  FunctionalForm generating_form() const {
    return FunctionalForm(kind, kind == Kind::Nonparametric ? Framework::LCSM : Framework::LGCM);
  }

  /// Generating parameters (residual_var is floored away from zero so that
  /// noise-free designs still describe a valid model).
  ParameterSet truth() const {
    ParameterSet p;
    p.growth_means = factor_means;
    p.growth_cov = factor_cov();
    p.residual_var = residual_var > 0 ? residual_var : std::numeric_limits<double>::min();
    if (kind == Kind::Nonparametric) p.gamma = gamma;
    if (kind == Kind::NegativeExponential) p.b = b;
    if (kind == Kind::JenssBayley) p.c = c;
    return p;
  }

  void validate() const {
    if (n < 1) throw ModelError("design: n must be positive");
    if (waves() < 3) throw ModelError("design: at least three waves are required");
    if (replications < 1) throw ModelError("design: replications must be positive");
    if (!(jitter >= 0)) throw ModelError("design: jitter must be non-negative");
    if (!(residual_var >= 0)) throw ModelError("design: residual_var must be non-negative");
    if (!(rho > -1 && rho < 1)) throw ModelError("design: rho must lie in (-1, 1)");
    const FunctionalForm form = generating_form();
    const int k = form.factor_count();
    if (factor_means.size() != k || factor_sds.size() != k)
      throw ModelError("design: expected " + std::to_string(k) + " growth factors");
    if ((factor_sds.array() < 0).any()) throw ModelError("design: factor sds must be >= 0");
    for (int j = 1; j < waves(); ++j)
      if (!(wave_times(j) - wave_times(j - 1) > 2 * jitter))
        throw ModelError("design: jitter window must be narrower than half the wave spacing");
    lcsm::validate(form, truth(), waves());
  }
};

/// Names the Table-3 style conditions:
///   <form>-n<200|500>-w<6|10|10u>-r<1|2>[-<variant>]
/// with variant dec|inc (lbgm), b04|b08 (exp), s25|s10 (jb), none for quad.
/// Example: "lbgm-n500-w10u-r1-dec".
inline SimulationDesign preset_design(std::string_view name) {
  std::vector<std::string> parts;
  {
    std::string cur;
    for (char ch : name) {
      if (ch == '-') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    parts.push_back(cur);
  }
  auto fail = [&] { throw ModelError("unknown design preset '" + std::string(name) + "'"); };
  if (parts.size() < 4) fail();
  const auto kind = parse_kind(parts[0]);
  if (!kind) fail();

  SimulationDesign d;
  d.name = std::string(name);
  d.kind = *kind;
  if (parts[1] == "n200") d.n = 200;
  else if (parts[1] == "n500") d.n = 500;
  else fail();
  WaveGrid grid{};
  if (parts[2] == "w6") grid = WaveGrid::Equal6;
  else if (parts[2] == "w10") grid = WaveGrid::Equal10;
  else if (parts[2] == "w10u") grid = WaveGrid::Unequal10;
  else fail();
  d.wave_times = wave_grid_times(grid);
  if (parts[3] == "r1") d.residual_var = 1.0;
  else if (parts[3] == "r2") d.residual_var = 2.0;
  else fail();
  const std::string variant = parts.size() > 4 ? parts[4] : "";
  if (parts.size() > 5) fail();
  const bool six = grid == WaveGrid::Equal6;

  switch (d.kind) {
    case Kind::Nonparametric: {
      d.factor_means = Eigen::Vector2d(50.0, 3.0);
      d.factor_sds = Eigen::Vector2d(5.0, 1.0);
      const int J = d.waves();
      d.gamma.resize(J - 1);
      d.gamma(0) = 1.0;
      double step;
      if (variant == "dec") step = six ? -0.2 : -0.1;
      else if (variant == "inc") step = six ? 0.2 : 0.1;
      else fail();
      for (int g = 1; g < J - 1; ++g) d.gamma(g) = 1.0 + step * g;
      break;
    }
    case Kind::Quadratic:
      if (!variant.empty()) fail();
      d.factor_means = six ? Eigen::Vector3d(50.0, 16.0, -1.5) : Eigen::Vector3d(50.0, 20.0, -1.0);
      d.factor_sds = Eigen::Vector3d(5.0, 1.0, 0.3);
      break;
    case Kind::NegativeExponential:
      d.factor_means = Eigen::Vector2d(50.0, 30.0);
      d.factor_sds = Eigen::Vector2d(5.0, 3.0);
      if (variant == "b04") d.b = 0.4;
      else if (variant == "b08") d.b = 0.8;
      else fail();
      break;
    case Kind::JenssBayley:
      d.c = -0.7;
      if (variant == "s25") {
        d.factor_means = Eigen::Vector3d(50.0, 2.5, -30.0);
        d.factor_sds = Eigen::Vector3d(5.0, 1.0, 3.0);
      } else if (variant == "s10") {
        d.factor_means = Eigen::Vector3d(50.0, 1.0, -30.0);
        d.factor_sds = Eigen::Vector3d(5.0, 0.4, 3.0);
      } else {
        fail();
      }
      break;
  }
  d.validate();
  return d;
}

/// All preset names of the design grid.
inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  const char* ns[] = {"n200", "n500"};
  const char* ws[] = {"w6", "w10", "w10u"};
  const char* rs[] = {"r1", "r2"};
  const std::vector<std::pair<std::string, std::vector<std::string>>> forms = {
      {"lbgm", {"dec", "inc"}}, {"quad", {""}}, {"exp", {"b04", "b08"}}, {"jb", {"s25", "s10"}}};
  for (const auto& [form, variants] : forms)
    for (const char* n : ns)
      for (const char* w : ws)
        for (const char* r : rs)
          for (const auto& v : variants)
            out.push_back(form + "-" + n + "-" + w + "-" + r + (v.empty() ? "" : "-" + v));
  return out;
}

struct GeneratedData {
  LongitudinalSample sample;
  Eigen::MatrixXd factors;  // n x k generating growth factors
  Eigen::MatrixXd times;    // n x J
  Eigen::MatrixXd outcomes; // n x J
};

/// Generates replication `rep_index` of `design`. The draws come from the
/// counter-based stream (design.seed, rep_index), so any replication can be
/// regenerated on its own.
inline GeneratedData generate_dataset(const SimulationDesign& design, std::uint64_t rep_index) {
  design.validate();
  const FunctionalForm form = design.generating_form();
  const ParameterSet truth = design.truth();
  const int n = design.n;
  const int J = design.waves();
  const int k = form.factor_count();
  Philox rng(design.seed, rep_index);
  MultivariateNormal factor_dist(truth.growth_means, truth.growth_cov);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double resid_sd = std::sqrt(design.residual_var);

  Eigen::MatrixXd factors(n, k), times(n, J), outcomes(n, J);
  std::vector<std::string> ids(n);
  for (int i = 0; i < n; ++i) {
    ids[i] = std::to_string(i + 1);
    factors.row(i) = factor_dist(rng).transpose();
    for (int j = 0; j < J; ++j) {
      const double u = unif(rng);
      times(i, j) = design.wave_times(j) + ((j > 0 || design.jitter_first_wave) ? design.jitter * u : 0.0);
    }
    const Schedule schedule(times.row(i).transpose());
    const Eigen::MatrixXd lambda = build_loading_matrix(form, truth, schedule).values;
    const Eigen::VectorXd mean = lambda * factors.row(i).transpose();
    for (int j = 0; j < J; ++j) outcomes(i, j) = mean(j) + resid_sd * normal(rng);
  }
  LongitudinalSample sample(std::move(ids), outcomes, times);
  return {std::move(sample), std::move(factors), std::move(times), std::move(outcomes)};
}

/// Performance of one parameter over S retained replications.
struct ParameterMetrics {
  std::string name;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double relative_bias = 0.0;
  double empirical_se = 0.0;
  double relative_rmse = 0.0;
  double coverage = 0.0;
  double mc_se_bias = 0.0;  // sqrt(Var(estimate) / S)
};

inline constexpr double kWaldZ = 1.96;

/// Relative bias sum(est - truth) / (truth S), empirical SE with S - 1
/// denominator, relative RMSE sqrt(sum(est - truth)^2 / S) / truth, and the
/// share of intervals est +/- 1.96 se containing truth.
inline ParameterMetrics performance_metrics(std::string name, double truth,
                                            const std::vector<double>& estimates,
                                            const std::vector<double>& ses) {
  if (estimates.empty() || estimates.size() != ses.size())
    throw ModelError("metrics need one standard error per estimate");
  const double S = static_cast<double>(estimates.size());
  ParameterMetrics m;
  m.name = std::move(name);
  m.truth = truth;
  double sum = 0.0, sum_sq_err = 0.0;
  int covered = 0;
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    const double e = estimates[s];
    sum += e;
    sum_sq_err += (e - truth) * (e - truth);
    if (e - kWaldZ * ses[s] <= truth && truth <= e + kWaldZ * ses[s]) ++covered;
  }
  m.mean_estimate = sum / S;
  double ss = 0.0;
  for (double e : estimates) ss += (e - m.mean_estimate) * (e - m.mean_estimate);
  m.relative_bias = (sum - S * truth) / (truth * S);
  m.empirical_se = estimates.size() > 1 ? std::sqrt(ss / (S - 1)) : 0.0;
  m.relative_rmse = std::sqrt(sum_sq_err / S) / truth;
  m.coverage = covered / S;
  m.mc_se_bias = std::sqrt(m.empirical_se * m.empirical_se / S);
  return m;
}

/// Results for one fitted framework.
struct MetricSummary {
  FunctionalForm form{Kind::Quadratic, Framework::LCSM};
  std::vector<ParameterMetrics> parameters;
  double convergence_rate = 0.0;  // converged fits / attempted replications
  int converged = 0;
  int retained = 0;  // replications used for the metrics

  const ParameterMetrics& operator[](std::string_view name) const {
    for (const auto& p : parameters)
      if (p.name == name) return p;
    throw std::out_of_range("no parameter named " + std::string(name));
  }
};

struct ReplicationRecord {
  std::uint64_t rep_index = 0;
  Framework framework = Framework::LCSM;
  FitStatus status = FitStatus::Failed;
  bool retained = false;
  int n_retries_used = 0;
  double minus2ll = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd estimates;
  Eigen::VectorXd se;
};

struct StudyResult {
  std::string design_name;
  int requested = 0;
  int attempted = 0;
  int discarded = 0;            // non-convergent replications regenerated
  int structural_failures = 0;  // replications with a Failed fit or generation error
  std::vector<MetricSummary> summaries;
  std::vector<ReplicationRecord> records;

  const MetricSummary& summary(Framework f) const {
    for (const auto& s : summaries)
      if (s.form.framework() == f) return s;
    throw std::out_of_range("framework was not fitted");
  }
};

class StudyAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StudyOptions {
  FitConfig fit;           // seed is replaced per replication; workers forced to 1
  int workers = default_workers();
  int max_attempt_factor = 10;  // give up after this many attempts per requested replication
};

/// Runs `design.replications` convergent replications: each generated
/// dataset is fitted with every requested framework, and a replication is
/// retained only when all fits converge. Non-convergent replications are
/// discarded and replaced by the next replication index. Replications are
/// evaluated in parallel but retained strictly in index order.
inline StudyResult run_study(const SimulationDesign& design, const std::set<Framework>& targets,
                             const StudyOptions& options = {}) {
  design.validate();
  if (targets.empty()) throw ModelError("at least one target framework is required");
  std::vector<FunctionalForm> forms;
  for (Framework f : targets) forms.emplace_back(design.kind, f);
  const int S = design.replications;
  const ParameterSet truth = design.truth();

  struct Outcome {
    bool structural = false;
    std::vector<FitResult> fits;
  };

  StudyResult out;
  out.design_name = design.name;
  out.requested = S;
  std::vector<std::uint64_t> retained;
  std::vector<Outcome> outcomes;
  std::uint64_t next = 0;
  const std::uint64_t cap = static_cast<std::uint64_t>(options.max_attempt_factor) * S;

  while (static_cast<int>(retained.size()) < S) {
    if (next >= cap)
      throw StudyAborted("design '" + design.name + "': fewer than " + std::to_string(S) +
                         " convergent replications in " + std::to_string(cap) + " attempts");
    const std::uint64_t batch = std::min<std::uint64_t>(S - retained.size(), cap - next);
    std::vector<Outcome> fresh(batch);
    parallel_for(batch, options.workers, [&](std::size_t b) {
      const std::uint64_t rep = next + b;
      Outcome& o = fresh[b];
      try {
        const GeneratedData data = generate_dataset(design, rep);
        for (const auto& form : forms) {
          FitConfig cfg = options.fit;
          cfg.workers = 1;
          cfg.seed = Philox(design.seed, rep, 1 + static_cast<std::uint64_t>(form.framework()))();
          o.fits.push_back(fit(form, data.sample, cfg));
          if (o.fits.back().status == FitStatus::Failed) o.structural = true;
        }
      } catch (const std::exception&) {
        o.structural = true;
      }
    });
    for (std::uint64_t b = 0; b < batch; ++b) {
      Outcome& o = fresh[b];
      ++out.attempted;
      const bool all_converged =
          !o.structural && std::all_of(o.fits.begin(), o.fits.end(), [](const FitResult& r) {
            return r.status == FitStatus::Converged;
          });
      if (o.structural) ++out.structural_failures;
      else if (!all_converged) ++out.discarded;
      if (all_converged && static_cast<int>(retained.size()) < S) retained.push_back(next + b);
      outcomes.push_back(std::move(o));
      if (static_cast<int>(retained.size()) == S) break;
    }
    next += batch;
    if (out.structural_failures > 0.2 * out.attempted)
      throw StudyAborted("design '" + design.name + "': more than 20% of replications failed (" +
                         std::to_string(out.structural_failures) + " of " +
                         std::to_string(out.attempted) + ")");
  }

  // Per-replication audit records.
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    const bool kept = std::binary_search(retained.begin(), retained.end(), r);
    for (std::size_t f = 0; f < outcomes[r].fits.size(); ++f) {
      const FitResult& fr = outcomes[r].fits[f];
      ReplicationRecord rec;
      rec.rep_index = r;
      rec.framework = forms[f].framework();
      rec.status = fr.status;
      rec.retained = kept;
      rec.n_retries_used = fr.n_retries_used;
      rec.minus2ll = fr.minus2ll;
      rec.estimates = fr.estimates;
      rec.se = fr.se;
      out.records.push_back(std::move(rec));
    }
  }

  for (std::size_t f = 0; f < forms.size(); ++f) {
    const Parameterization par(forms[f], design.waves());
    const Eigen::VectorXd true_vec = par.natural_vector(truth);
    MetricSummary summary{forms[f], {}, 0.0, 0, S};
    for (const auto& o : outcomes)
      if (f < o.fits.size() && o.fits[f].status == FitStatus::Converged) ++summary.converged;
    summary.convergence_rate = static_cast<double>(summary.converged) / out.attempted;
    for (int p = 0; p < par.size(); ++p) {
      std::vector<double> est, se;
      for (std::uint64_t r : retained) {
        est.push_back(outcomes[r].fits[f].estimates(p));
        se.push_back(outcomes[r].fits[f].se(p));
      }
      summary.parameters.push_back(performance_metrics(par.names()[p], true_vec(p), est, se));
    }
    out.summaries.push_back(std::move(summary));
  }
  return out;
}

}  // namespace lcsm
