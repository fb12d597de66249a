#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fradkov/model.hpp"

namespace fradkov {

struct RhsEvaluation {
  State dg;  // time derivative of each g_n^k; ghost columns stay zero
  double gamma_used = 0.0;
};

/// Right-hand side of the semi-discrete upwind system for a frozen coupling weight.
RhsEvaluation rhs(const State& state, const Grid& grid, const Parameters& params, double gamma);

/// Same as rhs() but writes into a preallocated state of matching shape.
void rhs_into(const State& state, const Grid& grid, const Parameters& params, double gamma, State& out);

/// Largest Euler step that keeps every diagonal coefficient of the update nonnegative,
/// scaled by params.dt_safety.
double stable_dt(const Parameters& params, double gamma_bound);

/// A-priori bound 5/(2-beta) when beta < 2 and it dominates the current value, else 2*current.
double default_gamma_bound(const Parameters& params, double current_gamma);

/// state + dt * rhs(state, stabilized_gamma(state)); the weight equals gamma(state) on the
/// admissible set.
State euler_step(const State& state, double dt, const Grid& grid, const Parameters& params);

struct Projection {
  State state;
  double alpha_low = 0.0;   // factor on classes 2..5
  double alpha_high = 0.0;  // factor on classes 6..N
};

/// Rescales the two class blocks of a nonnegative raw state so that A = area_target and
/// P + eps Q = 0. Throws SingularProjection if no positive pair of factors exists.
Projection project_initial(const State& raw, const Parameters& params, const Grid& grid);

enum class InitKind { random, uniform, localized };

InitKind parse_init_kind(const std::string& name);
std::string to_string(InitKind kind);

/// Raw data of the requested kind, projected onto the admissible set. Random data is
/// drawn i.i.d. uniform on [0,1] from params.seed and redrawn on SingularProjection.
State make_initial(InitKind kind, const Parameters& params, const Grid& grid);

/// ||rhs||_inf / max(||g||_inf, 1e-30) with the integrator's coupling weight at the state.
double residual(const State& state, const Grid& grid, const Parameters& params);

struct HistorySample {
  long step = 0;
  double time = 0.0;
  double residual = 0.0;
  double gamma = 0.0;
  double area = 0.0;
  double constraint = 0.0;  // P + eps Q
};

struct SteadyStateReport {
  State profile;
  double gamma = 0.0;
  double residual = 0.0;
  long steps = 0;
  double time = 0.0;
  double drift_area = 0.0;        // max |A - area_target| along the run
  double drift_constraint = 0.0;  // max |P + eps Q| along the run
  double min_g = 0.0;             // min entry over all visited states
  bool converged = false;
  std::vector<HistorySample> history;
};

struct SolveOptions {
  double tol = 1e-9;
  long max_steps = 10'000'000;
  long sample_every = 0;  // 0 disables the history
  long bound_refresh = 1000;
};

/// Explicit Euler relaxation until residual <= tol or max_steps. A non-converged run is
/// returned with converged == false; NonpositiveDenominator propagates.
SteadyStateReport integrate_to_steady(const State& init, const Grid& grid, const Parameters& params,
                                      const SolveOptions& options);

}  // namespace fradkov
