#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fradkov/diagnostics.hpp"
#include "fradkov/dynamics.hpp"
#include "fradkov/model.hpp"
#include "json.hpp"

namespace fradkov {

inline constexpr const char* kSchemaVersion = "1";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

/// Header `n,k,xi,g`, one row per (n, k) with k = 0..K including boundary rows.
void write_profile_csv(const State& profile, const Grid& grid, const Parameters& params,
                       const std::filesystem::path& path);
/// Parses a profile written by write_profile_csv; ghost rows are validated for shape only.
State read_profile_csv(const Parameters& params, const std::filesystem::path& path);

/// Header `n,X,Y,lnX`, one row per class; lnX is empty where X <= 0.
void write_moments_csv(const State& profile, const Grid& grid, const Parameters& params,
                       const std::filesystem::path& path);

void write_history_csv(const std::vector<HistorySample>& history, const std::filesystem::path& path);

struct RunConfig {
  std::string subcommand = "solve";  // solve | sweep | verify | converge
  Parameters params;
  std::vector<double> beta_list;
  std::vector<double> eps_list;
  std::vector<int> n_list;
  InitKind init = InitKind::random;
  double tol = 1e-9;
  long max_steps = 10'000'000;
  long sample_every = 0;
  int workers = 1;
  std::string out_dir = "out";
  std::string in_dir;  // verify input
};

struct IdentitySummary {
  double mass = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
  double polyhedral = 0.0;
  double area = 0.0;
};

struct DecaySummary {
  double slope = 0.0;
  double tau = 0.0;
  double target_slope = 0.0;  // -ln tau
  int window_first = 0;
  int window_last = 0;
  int nbar = 0;
  double terminal_residual = 0.0;
};

struct SingularitySummary {
  int supercritical = 0;
  int critical = 0;
  int subcritical = 0;
  int non_integrable = 0;
  double max_ratio_gap = 0.0;  // max |measured/predicted - 1| over supercritical classes n <= N-3
};

/// Full per-class diagnostics written by `verify`.
struct FullDiagnostics {
  std::vector<double> x_identity;
  std::vector<double> y_identity;
  std::vector<double> z;
  std::vector<double> recursion_residual;
  std::vector<SingularityEntry> singularities;
};

struct RunManifest {
  std::string schema_version = kSchemaVersion;
  RunConfig config;
  double gamma = 0.0;
  double residual = 0.0;
  long steps = 0;
  bool converged = false;
  double drift_area = 0.0;
  double drift_constraint = 0.0;
  double min_g = 0.0;
  double sum_X = 0.0;
  IdentitySummary identities;
  DecaySummary decay;
  SingularitySummary singularities;
  double wall_seconds = 0.0;
  std::optional<FullDiagnostics> full;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Fills the diagnostic fields of a manifest from a finished run.
void summarize(RunManifest& manifest, const SteadyStateReport& report, const Grid& grid, const Parameters& params,
               bool with_full_diagnostics);

}  // namespace fradkov
