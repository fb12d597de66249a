#include "fradkov/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>

#include "fradkov/errors.hpp"

namespace fradkov {

namespace fs = std::filesystem;

namespace {

struct RunFailure {
  int code;
  std::string kind;
  std::string message;
};

void report_failure(const RunFailure& f, const fs::path& out_dir, std::ostream& log) {
  const nlohmann::json record{{"error", f.kind}, {"message", f.message}, {"exit_code", f.code}};
  log << record.dump() << '\n';
  std::error_code ec;
  if (!out_dir.empty() && fs::is_directory(out_dir, ec)) {
    std::ofstream out(out_dir / "error.json", std::ios::binary);
    out << record.dump(2) << '\n';
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

SolveOptions solve_options(const RunConfig& c) {
  SolveOptions o;
  o.tol = c.tol;
  o.max_steps = c.max_steps;
  o.sample_every = c.sample_every;
  return o;
}

// Solves one configuration and writes profile.csv, moments.csv, manifest.json into dir.
RunManifest solve_into(const RunConfig& config, const fs::path& dir) {
  const auto start = std::chrono::steady_clock::now();
  const Parameters& params = config.params;
  const Grid grid(params);
  const State init = make_initial(config.init, params, grid);
  const SteadyStateReport report = integrate_to_steady(init, grid, params, solve_options(config));

  fs::create_directories(dir);
  write_profile_csv(report.profile, grid, params, dir / "profile.csv");
  write_moments_csv(report.profile, grid, params, dir / "moments.csv");
  if (!report.history.empty()) write_history_csv(report.history, dir / "history.csv");

  RunManifest m;
  m.config = config;
  summarize(m, report, grid, params, false);
  m.wall_seconds = seconds_since(start);
  write_manifest(m, dir / "manifest.json");
  return m;
}

std::string beta_label(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "beta_%.4g", beta);
  return buf;
}

int run_solve(const RunConfig& config, std::ostream& log) {
  const RunManifest m = solve_into(config, config.out_dir);
  log << "gamma=" << format_double(m.gamma) << " residual=" << m.residual << " steps=" << m.steps << '\n';
  if (!m.converged)
    throw RunFailure{kExitNotConverged, "NotConverged",
                     "residual " + format_double(m.residual) + " above tolerance after " + std::to_string(m.steps) +
                         " steps"};
  return kExitOk;
}

int run_sweep(const RunConfig& config, std::ostream& log) {
  std::vector<double> betas = config.beta_list.empty() ? std::vector<double>{config.params.beta} : config.beta_list;
  std::vector<RunManifest> results(betas.size());
  std::vector<std::optional<RunFailure>> failures(betas.size());
  fs::create_directories(config.out_dir);

  run_parallel(betas.size(), config.workers, [&](std::size_t i) {
    RunConfig single = config;
    single.subcommand = "solve";
    single.params.beta = betas[i];
    single.beta_list.clear();
    const fs::path dir = fs::path(config.out_dir) / beta_label(betas[i]);
    single.out_dir = dir.string();
    try {
      single.params.validate();
      results[i] = solve_into(single, dir);
    } catch (const NonpositiveDenominator& e) {
      failures[i] = RunFailure{kExitNonpositiveDenominator, "NonpositiveDenominator", e.what()};
    }
  });

  std::ofstream out(fs::path(config.out_dir) / "sweep.csv", std::ios::binary);
  out << "beta,gamma,sum_X,residual,steps,converged\n";
  int code = kExitOk;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    out << format_double(betas[i]) << ',';
    if (failures[i]) {
      out << ",,,,0\n";
      code = std::max(code, static_cast<int>(failures[i]->code));
      continue;
    }
    const RunManifest& m = results[i];
    out << format_double(m.gamma) << ',' << format_double(m.sum_X) << ',' << format_double(m.residual) << ','
        << m.steps << ',' << (m.converged ? 1 : 0) << '\n';
    if (!m.converged) code = std::max(code, static_cast<int>(kExitNotConverged));
  }
  out.flush();
  if (!out) throw IoError("write failed for sweep.csv");
  log << "sweep: " << betas.size() << " runs written to " << config.out_dir << '\n';
  if (code == kExitNonpositiveDenominator)
    throw RunFailure{code, "NonpositiveDenominator", "at least one sweep entry left the admissible regime"};
  if (code == kExitNotConverged) throw RunFailure{code, "NotConverged", "at least one sweep entry did not converge"};
  return kExitOk;
}

int run_verify(const RunConfig& config, std::ostream& log) {
  if (config.in_dir.empty()) throw InvalidParameters("verify requires an input directory");
  const fs::path in = config.in_dir;
  const RunManifest original = read_manifest(in / "manifest.json");
  const Parameters params = original.config.params;
  params.validate();
  const Grid grid(params);

  SteadyStateReport report;
  report.profile = read_profile_csv(params, in / "profile.csv");
  report.gamma = stabilized_gamma(evaluate_coupling(report.profile, grid, params), grid.eps());
  report.residual = residual(report.profile, grid, params);
  report.steps = original.steps;
  report.converged = original.converged;
  report.drift_area = original.drift_area;
  report.drift_constraint = original.drift_constraint;
  report.min_g = original.min_g;

  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.config = original.config;
  summarize(m, report, grid, params, true);
  m.wall_seconds = original.wall_seconds + seconds_since(start);

  const fs::path out = config.out_dir.empty() ? in : fs::path(config.out_dir);
  fs::create_directories(out);
  write_manifest(m, out / "manifest.json");
  log << "verify: max relative deviation from input manifest " << max_relative_difference(original, m) << '\n';
  return kExitOk;
}

int run_converge(const RunConfig& config, std::ostream& log) {
  StudyOptions options;
  options.solve = solve_options(config);
  options.solve.sample_every = 0;
  options.init = config.init;
  options.workers = config.workers;

  std::vector<ConvergenceRow> rows;
  if (!config.n_list.empty())
    rows = class_convergence(config.params, config.n_list, options);
  else if (!config.eps_list.empty())
    rows = epsilon_convergence(config.params, config.eps_list, options);
  else
    throw InvalidParameters("converge requires an eps list or an N list");

  fs::create_directories(config.out_dir);
  std::ofstream out(fs::path(config.out_dir) / "convergence.csv", std::ios::binary);
  out << "eps,n_max,gamma,l1_to_reference,residual,steps,converged\n";
  bool all_converged = true;
  for (const auto& r : rows) {
    out << format_double(r.eps) << ',' << r.n_max << ',' << format_double(r.gamma) << ','
        << format_double(r.l1_to_reference) << ',' << format_double(r.residual) << ',' << r.steps << ','
        << (r.converged ? 1 : 0) << '\n';
    all_converged = all_converged && r.converged;
  }
  out.flush();
  if (!out) throw IoError("write failed for convergence.csv");
  log << "converge: " << rows.size() << " rows\n";
  if (!all_converged) throw RunFailure{kExitNotConverged, "NotConverged", "at least one refinement did not converge"};
  return kExitOk;
}

}  // namespace

double max_relative_difference(const RunManifest& a, const RunManifest& b) {
  auto rel = [](double x, double y) {
    if (std::isnan(x) && std::isnan(y)) return 0.0;
    const double scale = std::max(std::abs(x), std::abs(y));
    return scale == 0.0 ? 0.0 : std::abs(x - y) / scale;
  };
  const double pairs[][2] = {{a.gamma, b.gamma},
                             {a.residual, b.residual},
                             {a.sum_X, b.sum_X},
                             {a.identities.mass, b.identities.mass},
                             {a.identities.max_x, b.identities.max_x},
                             {a.identities.max_y, b.identities.max_y},
                             {a.identities.polyhedral, b.identities.polyhedral},
                             {a.identities.area, b.identities.area},
                             {a.decay.slope, b.decay.slope},
                             {a.decay.terminal_residual, b.decay.terminal_residual},
                             {a.singularities.max_ratio_gap, b.singularities.max_ratio_gap}};
  double worst = 0.0;
  for (const auto& p : pairs) worst = std::max(worst, rel(p[0], p[1]));
  return worst;
}

int run(const RunConfig& config, std::ostream& log) {
  const fs::path out_dir = config.out_dir.empty() ? fs::path(config.in_dir) : fs::path(config.out_dir);
  try {
    for (const auto& w : config.params.validate()) log << "warning: " << w << '\n';
    if (!(config.tol > 0.0)) throw InvalidParameters("tol must be positive");
    if (config.max_steps < 0) throw InvalidParameters("max_steps must be nonnegative");
    if (config.subcommand == "sweep")
      for (double b : config.beta_list) {
        Parameters p = config.params;
        p.beta = b;
        p.validate();
      }
    if (config.subcommand == "converge")
      for (double e : config.eps_list) with_spacing(config.params, e);

    if (config.subcommand == "solve") return run_solve(config, log);
    if (config.subcommand == "sweep") return run_sweep(config, log);
    if (config.subcommand == "verify") return run_verify(config, log);
    if (config.subcommand == "converge") return run_converge(config, log);
    throw InvalidParameters("unknown subcommand " + config.subcommand);
  } catch (const RunFailure& f) {
    report_failure(f, out_dir, log);
    return f.code;
  } catch (const InvalidParameters& e) {
    report_failure({kExitConfig, "InvalidConfig", e.what()}, out_dir, log);
    return kExitConfig;
  } catch (const NonpositiveDenominator& e) {
    report_failure({kExitNonpositiveDenominator, "NonpositiveDenominator", e.what()}, out_dir, log);
    return kExitNonpositiveDenominator;
  } catch (const SingularProjection& e) {
    report_failure({kExitConfig, "SingularProjection", e.what()}, out_dir, log);
    return kExitConfig;
  } catch (const IoError& e) {
    report_failure({1, "IoError", e.what()}, out_dir, log);
    return 1;
  }
}

}  // namespace fradkov
