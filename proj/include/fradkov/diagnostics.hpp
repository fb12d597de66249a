#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fradkov/dynamics.hpp"
#include "fradkov/model.hpp"

namespace fradkov {

// ---------------------------------------------------------------------------
// Moment identities of a steady state

struct IdentityResiduals {
  double mass_identity = 0.0;     // |sum_{n<=5} (6-n) g_n^1 - sum_n X_n|
  std::vector<double> x_identity;  // |(6-n) g_n(0) - X_n - Gamma (J X)_n|
  std::vector<double> y_identity;  // |(6-n) X_n - Gamma (J Y)_n|
  double polyhedral = 0.0;         // |P|
  double area = 0.0;               // |A - area_target|

  double max_x() const;
  double max_y() const;
};

IdentityResiduals verify_steady_identities(const SteadyStateReport& report, const Grid& grid,
                                           const Parameters& params);

// ---------------------------------------------------------------------------
// Tail decay: z_n = (n-1) X_{n-1} / (n X_n) and its backward recursion

/// Inclusive range of classes used for the log-linear fit of X_n.
struct DecayWindow {
  int first = 12;
  int last = 22;
  static DecayWindow default_for(const Parameters& params);
};

/// Phi(z) = 1 + tau - tau / z.
double phi(double z, double tau);

/// Smallest integer larger than 12 (1 + 2 beta)^2.
int decay_threshold_class(double beta);

struct DecayDiagnostics {
  // Indexed by class slot (n-2); NaN where undefined.
  std::vector<double> z;                   // n >= 3
  std::vector<double> recursion_residual;  // 6 <= n <= N-1
  double terminal_residual = 0.0;
  double tau = 0.0;
  double slope = 0.0;      // least-squares slope of ln X_n over the window
  double intercept = 0.0;
  int nbar = 0;
  DecayWindow window;
};

DecayDiagnostics decay_diagnostics(std::span<const double> X, double gamma, const Parameters& params,
                                   DecayWindow window);
DecayDiagnostics decay_diagnostics(const SteadyStateReport& report, const Grid& grid, const Parameters& params,
                                   DecayWindow window);

// ---------------------------------------------------------------------------
// Behaviour at the singular points xi = n - 6

enum class Regime { supercritical, critical, subcritical, non_integrable };

std::string to_string(Regime regime);

/// Classification by Gamma kappa_n: > 2, == 2, in (1,2), <= 1.
Regime classify_regime(double gamma_kappa);

/// (Gamma kappa - 2) / (Gamma kappa - 1).
double predicted_ratio(double gamma_kappa);

/// Continuum value g_n(n-6) estimated by averaging the two one-sided linear extrapolations
/// from cells k_n +- 1, k_n +- 2. Throws TooCloseToBoundary if the stencil leaves 1..K-1.
double extrapolated_singular_value(const State& profile, const Grid& grid, int n);

struct SingularityEntry {
  int n = 0;
  double gamma_kappa = 0.0;
  Regime regime = Regime::supercritical;
  double predicted_limit = 0.0;  // G_n(n-6) / (Gamma kappa_n - 2), NaN unless supercritical
  double grid_value = 0.0;       // g_n^{k_n}
  double extrapolated = 0.0;     // estimate of g_n(n-6), NaN when the stencil does not fit
  double measured_ratio = 0.0;   // grid_value / extrapolated, NaN when unavailable
  double predicted_ratio = 0.0;  // NaN unless Gamma kappa_n > 1
};

struct SingularityReport {
  std::vector<SingularityEntry> entries;  // n = 6..N
  int count(Regime regime) const;
};

SingularityReport classify_singularities(const SteadyStateReport& report, const Grid& grid,
                                         const Parameters& params);

// ---------------------------------------------------------------------------
// Independent check of a profile against the stationary ODE

struct OdeInterval {
  double a = 0.0;
  double b = 0.0;
};

struct OdeSample {
  double xi = 0.0;
  double value = 0.0;
};

enum class OdeDirection { forward, backward };

/// Integrates -2 g - (xi + 6 - n) g' = Gamma (J g)_n for class n across the interval with classical
/// RK4 steps of at most eps/10, with g_{n-1} and g_{n+1} linearly interpolated from `profile`.
/// Forward starts at a with start_value, backward starts at b. Returns the solution at every grid
/// point strictly inside the interval and at the far end, ordered by increasing xi.
std::vector<OdeSample> integrate_stationary_ode(const State& profile, const Grid& grid, const Parameters& params,
                                                double gamma, int n, OdeInterval interval, double start_value,
                                                OdeDirection direction = OdeDirection::forward);

/// Homogeneous solutions behave like |xi + 6 - n|^(Gamma kappa_n - 2). The stable direction is the one
/// in which they shrink: towards n-6 when Gamma kappa_n > 2, away from it otherwise.
OdeDirection stable_direction(double gamma_kappa, int n, OdeInterval interval);

/// Max deviation between the ODE solution, started from the profile at the upstream end of the
/// stable direction, and the profile itself.
/// Throws IntervalTouchesSingularity if [a, b] comes within 2 eps of n-7, n-6 or n-5.
double ode_oracle(const SteadyStateReport& report, const Grid& grid, const Parameters& params, int n,
                  OdeInterval interval);

/// Linear interpolation of the discrete profile of class n at xi (boundary values at the ends).
double interpolate_profile(const State& profile, const Grid& grid, int n, double xi);

// ---------------------------------------------------------------------------
// Refinement studies

struct ConvergenceRun {
  Parameters params;
  SteadyStateReport report;
};

struct ConvergenceRow {
  double eps = 0.0;
  int n_max = 0;
  double gamma = 0.0;
  double l1_to_reference = 0.0;
  double residual = 0.0;
  long steps = 0;
  bool converged = false;
};

/// L1 distance between two profiles on the same domain after averaging both over the
/// piecewise-constant cells of a grid with `target_cells` cells. Only classes present in
/// both profiles are compared.
double restricted_l1_difference(const State& a, const Parameters& pa, const State& b, const Parameters& pb,
                                int target_cells);

/// Rows sorted by decreasing eps; differences are taken against the finest run.
std::vector<ConvergenceRow> tabulate_epsilon_convergence(const std::vector<ConvergenceRun>& runs);

/// Rows sorted by increasing N; differences are taken against the largest N.
std::vector<ConvergenceRow> tabulate_class_convergence(const std::vector<ConvergenceRun>& runs);

struct StudyOptions {
  SolveOptions solve;
  InitKind init = InitKind::random;
  int workers = 1;
};

/// Solves one steady state per spacing (concurrently up to options.workers).
std::vector<ConvergenceRow> epsilon_convergence(const Parameters& base, std::span<const double> eps_list,
                                                const StudyOptions& options);

/// Same for a list of maximal classes at fixed spacing.
std::vector<ConvergenceRow> class_convergence(const Parameters& base, std::span<const int> n_list,
                                              const StudyOptions& options);

/// Runs `count` independent jobs on up to `workers` threads.
void run_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

}  // namespace fradkov
