#include "fradkov/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fradkov/errors.hpp"

namespace fradkov {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

// strtod rather than stod: the compact-support tail holds subnormal values, which stod rejects.
double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isinf(v)) throw IoError("malformed number: " + s);
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("malformed integer: " + s);
  return v;
}

// NaN is stored as null so that manifests stay valid JSON.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_of(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
std::vector<double> nums_of(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(num_of(x));
  return v;
}

Regime regime_of(const std::string& s) {
  for (Regime r : {Regime::supercritical, Regime::critical, Regime::subcritical, Regime::non_integrable})
    if (to_string(r) == s) return r;
  throw IoError("unknown regime " + s);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_profile_csv(const State& profile, const Grid& grid, const Parameters& params,
                       const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "n,k,xi,g\n";
  for (int n = kMinClass; n <= params.n_max; ++n)
    for (int k = 0; k <= params.cells; ++k)
      out << n << ',' << k << ',' << format_double(grid.xi(k)) << ',' << format_double(profile_value(profile, n, k))
          << '\n';
  finish(out, path);
}

State read_profile_csv(const Parameters& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "n,k,xi,g") throw IoError("unexpected profile header in " + path.string());
  State s = State::zeros(params);
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw IoError("malformed profile row: " + line);
    const int n = parse_int(f[0]);
    const int k = parse_int(f[1]);
    if (n < kMinClass || n > params.n_max || k < 0 || k > params.cells) throw IoError("profile index out of range");
    if (k > 0 && k < params.cells) s.at(n, k) = parse_double(f[3]);
    ++rows;
  }
  if (rows != static_cast<long>(params.num_classes()) * (params.cells + 1))
    throw IoError("profile row count does not match parameters");
  return s;
}

void write_moments_csv(const State& profile, const Grid& grid, const Parameters& params,
                       const std::filesystem::path& path) {
  const Moments m = moments(profile, grid, params);
  auto out = open_out(path);
  out << "n,X,Y,lnX\n";
  for (int n = kMinClass; n <= params.n_max; ++n) {
    const double x = m.X[class_slot(n)];
    out << n << ',' << format_double(x) << ',' << format_double(m.Y[class_slot(n)]) << ',';
    if (x > 0.0) out << format_double(std::log(x));
    out << '\n';
  }
  finish(out, path);
}

void write_history_csv(const std::vector<HistorySample>& history, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "step,time,residual,gamma,area,constraint\n";
  for (const auto& h : history)
    out << h.step << ',' << format_double(h.time) << ',' << format_double(h.residual) << ','
        << format_double(h.gamma) << ',' << format_double(h.area) << ',' << format_double(h.constraint) << '\n';
  finish(out, path);
}

json to_json(const RunConfig& c) {
  const Parameters& p = c.params;
  return json{{"subcommand", c.subcommand},
              {"beta", p.beta},
              {"n_max", p.n_max},
              {"domain_length", p.domain_length},
              {"cells", p.cells},
              {"eps", p.eps()},
              {"area", p.area_target},
              {"dt_safety", p.dt_safety},
              {"seed", p.seed},
              {"beta_list", c.beta_list},
              {"eps_list", c.eps_list},
              {"n_list", c.n_list},
              {"init", to_string(c.init)},
              {"tol", c.tol},
              {"max_steps", c.max_steps},
              {"sample_every", c.sample_every},
              {"workers", c.workers},
              {"out_dir", c.out_dir},
              {"in_dir", c.in_dir}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.subcommand = j.at("subcommand").get<std::string>();
  c.params.beta = j.at("beta").get<double>();
  c.params.n_max = j.at("n_max").get<int>();
  c.params.domain_length = j.at("domain_length").get<int>();
  c.params.cells = j.at("cells").get<int>();
  c.params.area_target = j.at("area").get<double>();
  c.params.dt_safety = j.at("dt_safety").get<double>();
  c.params.seed = j.at("seed").get<std::uint64_t>();
  c.beta_list = j.at("beta_list").get<std::vector<double>>();
  c.eps_list = j.at("eps_list").get<std::vector<double>>();
  c.n_list = j.at("n_list").get<std::vector<int>>();
  c.init = parse_init_kind(j.at("init").get<std::string>());
  c.tol = j.at("tol").get<double>();
  c.max_steps = j.at("max_steps").get<long>();
  c.sample_every = j.at("sample_every").get<long>();
  c.workers = j.at("workers").get<int>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.in_dir = j.at("in_dir").get<std::string>();
  return c;
}

json to_json(const RunManifest& m) {
  json j{{"schema_version", m.schema_version},
         {"config", to_json(m.config)},
         {"gamma", num(m.gamma)},
         {"residual", num(m.residual)},
         {"steps", m.steps},
         {"converged", m.converged},
         {"drift", {{"area", num(m.drift_area)}, {"constraint", num(m.drift_constraint)}}},
         {"min_g", num(m.min_g)},
         {"sum_X", num(m.sum_X)},
         {"identities",
          {{"mass", num(m.identities.mass)},
           {"max_x", num(m.identities.max_x)},
           {"max_y", num(m.identities.max_y)},
           {"polyhedral", num(m.identities.polyhedral)},
           {"area", num(m.identities.area)}}},
         {"decay",
          {{"slope", num(m.decay.slope)},
           {"tau", num(m.decay.tau)},
           {"target_slope", num(m.decay.target_slope)},
           {"window", {m.decay.window_first, m.decay.window_last}},
           {"nbar", m.decay.nbar},
           {"terminal_residual", num(m.decay.terminal_residual)}}},
         {"singularities",
          {{"supercritical", m.singularities.supercritical},
           {"critical", m.singularities.critical},
           {"subcritical", m.singularities.subcritical},
           {"non_integrable", m.singularities.non_integrable},
           {"max_ratio_gap", num(m.singularities.max_ratio_gap)}}},
         {"wall_seconds", m.wall_seconds}};
  if (m.full) {
    json table = json::array();
    for (const auto& e : m.full->singularities)
      table.push_back({{"n", e.n},
                       {"gamma_kappa", num(e.gamma_kappa)},
                       {"regime", to_string(e.regime)},
                       {"predicted_limit", num(e.predicted_limit)},
                       {"grid_value", num(e.grid_value)},
                       {"extrapolated", num(e.extrapolated)},
                       {"measured_ratio", num(e.measured_ratio)},
                       {"predicted_ratio", num(e.predicted_ratio)}});
    j["diagnostics"] = {{"x_identity", nums(m.full->x_identity)},
                        {"y_identity", nums(m.full->y_identity)},
                        {"z", nums(m.full->z)},
                        {"recursion_residual", nums(m.full->recursion_residual)},
                        {"singularities", table}};
  }
  return j;
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.schema_version = j.at("schema_version").get<std::string>();
  if (m.schema_version != kSchemaVersion) throw IoError("unsupported manifest schema " + m.schema_version);
  m.config = config_from_json(j.at("config"));
  m.gamma = num_of(j.at("gamma"));
  m.residual = num_of(j.at("residual"));
  m.steps = j.at("steps").get<long>();
  m.converged = j.at("converged").get<bool>();
  m.drift_area = num_of(j.at("drift").at("area"));
  m.drift_constraint = num_of(j.at("drift").at("constraint"));
  m.min_g = num_of(j.at("min_g"));
  m.sum_X = num_of(j.at("sum_X"));
  const json& id = j.at("identities");
  m.identities = {num_of(id.at("mass")), num_of(id.at("max_x")), num_of(id.at("max_y")),
                  num_of(id.at("polyhedral")), num_of(id.at("area"))};
  const json& d = j.at("decay");
  m.decay.slope = num_of(d.at("slope"));
  m.decay.tau = num_of(d.at("tau"));
  m.decay.target_slope = num_of(d.at("target_slope"));
  m.decay.window_first = d.at("window").at(0).get<int>();
  m.decay.window_last = d.at("window").at(1).get<int>();
  m.decay.nbar = d.at("nbar").get<int>();
  m.decay.terminal_residual = num_of(d.at("terminal_residual"));
  const json& s = j.at("singularities");
  m.singularities.supercritical = s.at("supercritical").get<int>();
  m.singularities.critical = s.at("critical").get<int>();
  m.singularities.subcritical = s.at("subcritical").get<int>();
  m.singularities.non_integrable = s.at("non_integrable").get<int>();
  m.singularities.max_ratio_gap = num_of(s.at("max_ratio_gap"));
  m.wall_seconds = j.at("wall_seconds").get<double>();
  if (j.contains("diagnostics")) {
    const json& dj = j.at("diagnostics");
    FullDiagnostics f;
    f.x_identity = nums_of(dj.at("x_identity"));
    f.y_identity = nums_of(dj.at("y_identity"));
    f.z = nums_of(dj.at("z"));
    f.recursion_residual = nums_of(dj.at("recursion_residual"));
    for (const auto& e : dj.at("singularities")) {
      SingularityEntry s_entry;
      s_entry.n = e.at("n").get<int>();
      s_entry.gamma_kappa = num_of(e.at("gamma_kappa"));
      s_entry.regime = regime_of(e.at("regime").get<std::string>());
      s_entry.predicted_limit = num_of(e.at("predicted_limit"));
      s_entry.grid_value = num_of(e.at("grid_value"));
      s_entry.extrapolated = num_of(e.at("extrapolated"));
      s_entry.measured_ratio = num_of(e.at("measured_ratio"));
      s_entry.predicted_ratio = num_of(e.at("predicted_ratio"));
      f.singularities.push_back(s_entry);
    }
    m.full = std::move(f);
  }
  return m;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << to_json(manifest).dump(2) << '\n';
  finish(out, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return manifest_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
}

void summarize(RunManifest& m, const SteadyStateReport& report, const Grid& grid, const Parameters& params,
               bool with_full_diagnostics) {
  m.gamma = report.gamma;
  m.residual = report.residual;
  m.steps = report.steps;
  m.converged = report.converged;
  m.drift_area = report.drift_area;
  m.drift_constraint = report.drift_constraint;
  m.min_g = report.min_g;

  const Moments mom = moments(report.profile, grid, params);
  m.sum_X = mom.sum_X();

  const IdentityResiduals ids = verify_steady_identities(report, grid, params);
  m.identities = {ids.mass_identity, ids.max_x(), ids.max_y(), ids.polyhedral, ids.area};

  const DecayWindow window = DecayWindow::default_for(params);
  DecayDiagnostics decay;
  try {
    decay = decay_diagnostics(mom.X, report.gamma, params, window);
  } catch (const EmptyWindow&) {
    decay.slope = std::numeric_limits<double>::quiet_NaN();
    decay.tau = (1.0 + params.beta) / params.beta;
    decay.nbar = decay_threshold_class(params.beta);
    decay.window = window;
    decay.terminal_residual = std::numeric_limits<double>::quiet_NaN();
  }
  m.decay = {decay.slope,        decay.tau,  -std::log(decay.tau), window.first,
             window.last,        decay.nbar, decay.terminal_residual};

  const SingularityReport sing = classify_singularities(report, grid, params);
  m.singularities = {sing.count(Regime::supercritical), sing.count(Regime::critical),
                     sing.count(Regime::subcritical), sing.count(Regime::non_integrable), 0.0};
  // The last classes sit against the edge of the support, where the one-sided extrapolation
  // is meaningless, so the summary stops at N-3.
  for (const auto& e : sing.entries)
    if (e.regime == Regime::supercritical && std::isfinite(e.measured_ratio) && e.n <= params.n_max - 3)
      m.singularities.max_ratio_gap =
          std::max(m.singularities.max_ratio_gap, std::abs(e.measured_ratio / e.predicted_ratio - 1.0));

  if (with_full_diagnostics)
    m.full = FullDiagnostics{ids.x_identity, ids.y_identity, decay.z, decay.recursion_residual, sing.entries};
  else
    m.full.reset();
}

}  // namespace fradkov
