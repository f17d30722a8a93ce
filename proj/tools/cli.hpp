#pragma once

// The lcsm command-line tool: fit, derive and simulate subcommands.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcsm/derived.hpp"
#include "lcsm/estimation.hpp"
#include "lcsm/io.hpp"
#include "lcsm/simulation.hpp"

namespace lcsm::cli {

struct FitArgs {
  std::string data, form, framework = "lcsm", out, start;
  std::uint64_t seed = 0;
  int retries = FitConfig{}.max_retries;
};

struct DeriveArgs {
  std::string report, out, schedule = "wave-mean", scores, data;
};

struct SimulateArgs {
  std::string design, out, targets, replications_csv;
  int reps = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

inline int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const auto kind = parse_kind(a.form);
  const auto framework = parse_framework(a.framework);
  const FunctionalForm form(*kind, *framework);
  const LoadedSample loaded = load_sample(a.data);
  for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';

  FitConfig config;
  config.seed = a.seed;
  config.max_retries = a.retries;
  std::optional<ParameterSet> start;
  if (!a.start.empty()) start = load_start(a.start);

  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.kind = form.kind();
  report.framework = form.framework();
  report.seed = a.seed;
  report.data_path = a.data;
  report.excluded = loaded.sample.excluded();
  report.wave_mean_times = loaded.sample.wave_mean_times();
  report.fit = fit(form, loaded.sample, config, start);
  if (report.fit.status == FitStatus::Converged) {
    const Schedule ref(report.wave_mean_times);
    report.derived = derived_moments(form, report.fit.params, ref);
    try {
      report.derived_se = derived_standard_errors(form, report.fit, ref);
    } catch (const ModelError& e) {
      err << "warning: no standard errors for derived change: " << e.what() << '\n';
    }
  }
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(a.out, serialize(report));
  out << estimates_table(report);
  switch (report.fit.status) {
    case FitStatus::Converged: return 0;
    case FitStatus::RetriesExhausted:
      err << "warning: " << report.fit.message << '\n';
      return 2;
    case FitStatus::Failed: break;
  }
  err << "error: fit failed: " << report.fit.message << '\n';
  return 1;
}

inline int cmd_derive(const DeriveArgs& a, std::ostream& out, std::ostream& err) {
  const RunReport report = parse_report(read_file(a.report));
  if (report.fit.status != FitStatus::Converged) {
    err << "error: report status is " << status_name(report.fit.status)
        << "; derived quantities need a converged fit\n";
    return 1;
  }
  const FunctionalForm form = report.form();
  const bool per_individual = a.schedule == "per-individual";
  std::optional<LoadedSample> loaded;
  if (per_individual || !a.scores.empty()) {
    const std::string path = a.data.empty() ? report.data_path : a.data;
    if (path.empty()) {
      err << "error: --data is required for per-individual output\n";
      return 1;
    }
    loaded.emplace(load_sample(path));
    if (loaded->sample.waves() != static_cast<int>(report.wave_mean_times.size())) {
      err << "error: data has " << loaded->sample.waves() << " waves but the report has "
          << report.wave_mean_times.size() << '\n';
      return 1;
    }
  }

  std::ostringstream curves;
  if (per_individual) {
    curves << "id," << kCurvesHeader << '\n';
    for (const auto& ind : loaded->sample.individuals())
      write_curves_csv(curves, derived_moments(form, report.fit.params, ind.schedule), ind.id);
  } else {
    curves << kCurvesHeader << '\n';
    write_curves_csv(curves,
                     derived_moments(form, report.fit.params, Schedule(report.wave_mean_times)));
  }
  write_file(a.out, curves.str());
  out << "wrote " << a.out << '\n';

  if (!a.scores.empty()) {
    std::ostringstream scores;
    write_scores_csv(scores, factor_scores(form, report.fit, loaded->sample));
    write_file(a.scores, scores.str());
    out << "wrote " << a.scores << '\n';
  }
  return 0;
}

inline std::set<Framework> parse_targets(const std::string& text, Kind kind) {
  std::set<Framework> out;
  if (text.empty()) {
    out.insert(Framework::LCSM);
    if (kind != Kind::Nonparametric) out.insert(Framework::LGCM);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto f = parse_framework(item);
    if (!f) throw ModelError("unknown target framework '" + item + "'");
    if (*f == Framework::LGCM && kind == Kind::Nonparametric)
      throw ModelError("the nonparametric form has no LGCM counterpart");
    out.insert(*f);
  }
  return out;
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  SimulationDesign design = std::filesystem::exists(a.design)
                                ? design_from_json(json::parse(read_file(a.design)))
                                : preset_design(a.design);
  if (a.reps > 0) design.replications = a.reps;
  if (a.seed_given) design.seed = a.seed;
  design.validate();
  const auto targets = parse_targets(a.targets, design.kind);

  const auto t0 = std::chrono::steady_clock::now();
  const StudyResult result = run_study(design, targets);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_file(a.out, to_json(result, design).dump(2) + "\n");
  std::string csv_path = a.replications_csv;
  if (csv_path.empty()) {
    std::filesystem::path p(a.out);
    p.replace_extension();
    csv_path = p.string() + "_replications.csv";
  }
  std::ostringstream csv;
  write_replications_csv(csv, result);
  write_file(csv_path, csv.str());

  out << design.name << ": " << result.requested << " replications retained of "
      << result.attempted << " attempted (" << result.discarded << " non-convergent, "
      << result.structural_failures << " failed) in " << fixed3(seconds) << " s\n";
  for (const auto& s : result.summaries) {
    out << s.form.label() << "  convergence " << fixed3(s.convergence_rate) << '\n';
    out << std::left << std::setw(14) << "parameter" << std::right << std::setw(10) << "truth"
        << std::setw(10) << "rel.bias" << std::setw(10) << "emp.SE" << std::setw(10) << "rel.RMSE"
        << std::setw(10) << "coverage" << '\n';
    for (const auto& p : s.parameters)
      out << std::left << std::setw(14) << p.name << std::right << std::setw(10) << fixed3(p.truth)
          << std::setw(10) << fixed3(p.relative_bias) << std::setw(10) << fixed3(p.empirical_se)
          << std::setw(10) << fixed3(p.relative_rmse) << std::setw(10) << fixed3(p.coverage)
          << '\n';
  }
  (void)err;
  return 0;
}

/// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Latent change score and growth curve models with individually varying "
               "measurement occasions",
               "lcsm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LCSM_VERSION);

  const std::vector<std::string> forms = {"lbgm", "quad", "exp", "jb"};
  const std::vector<std::string> frameworks = {"lcsm", "lgcm"};

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a wide CSV dataset");
  fit_cmd->add_option("--data", fa.data, "Wide CSV: id,y1..yJ,t1..tJ")->required();
  fit_cmd->add_option("--form", fa.form, "Functional form")
      ->required()
      ->check(CLI::IsMember(forms));
  fit_cmd->add_option("--framework", fa.framework, "Model framework")
      ->check(CLI::IsMember(frameworks))
      ->capture_default_str();
  fit_cmd->add_option("--out", fa.out, "Report JSON")->required();
  fit_cmd->add_option("--start", fa.start, "Starting values (parameter set or report JSON)");
  fit_cmd->add_option("--seed", fa.seed, "Seed for restart jitter")->capture_default_str();
  fit_cmd->add_option("--retries", fa.retries, "Optimization attempts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  DeriveArgs da;
  auto* derive_cmd =
      app.add_subcommand("derive", "Export change curves and factor scores from a report");
  derive_cmd->add_option("--report", da.report, "Report JSON from fit")->required();
  derive_cmd->add_option("--out", da.out, "Curves CSV")->required();
  derive_cmd->add_option("--schedule", da.schedule, "Reference schedule")
      ->check(CLI::IsMember({"wave-mean", "per-individual"}))
      ->capture_default_str();
  derive_cmd->add_option("--scores", da.scores, "Factor scores CSV");
  derive_cmd->add_option("--data", da.data, "Dataset (defaults to the report's data path)");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo study");
  sim_cmd->add_option("--design", sa.design, "Design JSON file or preset name")->required();
  sim_cmd->add_option("--reps", sa.reps, "Convergent replications")->check(CLI::PositiveNumber);
  auto* seed_opt = sim_cmd->add_option("--seed", sa.seed, "Study seed");
  sim_cmd->add_option("--out", sa.out, "Metrics JSON")->required();
  sim_cmd->add_option("--targets", sa.targets, "Comma-separated frameworks, e.g. lcsm,lgcm");
  sim_cmd->add_option("--replications-csv", sa.replications_csv,
                      "Per-replication CSV (default: <out>_replications.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << LCSM_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }
  sa.seed_given = seed_opt->count() > 0;

  try {
    if (fit_cmd->parsed()) return cmd_fit(fa, out, err);
    if (derive_cmd->parsed()) return cmd_derive(da, out, err);
    return cmd_simulate(sa, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lcsm::cli
