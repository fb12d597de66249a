#include "fradkov/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fradkov/errors.hpp"
#include "fradkov/summation.hpp"

namespace fradkov {

namespace {

void check_shape(const State& s, const Parameters& params) {
  if (s.n_max() != params.n_max || s.cells() != params.cells)
    throw ShapeMismatch("state shape does not match parameters");
}

// Block contributions of the two linear functionals (A, P + eps Q) used by the projection.
struct BlockFunctionals {
  double area = 0.0;
  double constraint = 0.0;
};

BlockFunctionals block_functionals(const State& raw, const Grid& grid, int n_lo, int n_hi) {
  CompensatedSum area, constraint;
  const double eps = grid.eps();
  for (int n = n_lo; n <= n_hi; ++n) {
    for (int k = 1; k < grid.cells(); ++k) {
      const double g = raw.at(n, k);
      const int v = grid.speed_index(n, k);
      area += eps * grid.xi(k) * g;
      constraint += eps * ((n - 6) + eps * ((v > 0) - (v < 0))) * g;
    }
  }
  return {area.value(), constraint.value()};
}

}  // namespace

void rhs_into(const State& state, const Grid& grid, const Parameters& params, double gamma, State& out) {
  check_shape(state, params);
  check_shape(out, params);
  const int N = params.n_max;
  const int K = params.cells;
  const double b = params.beta;
  const double up = (b + 1.0);
  const double kappa_mid = 2.0 * b + 1.0;

  for (int n = kMinClass; n <= N; ++n) {
    const double* g = state.row(n).data();
    const double* below = n > kMinClass ? state.row(n - 1).data() : nullptr;
    const double* above = n < N ? state.row(n + 1).data() : nullptr;
    double* d = out.row(n).data();

    // Collision coefficients of (J g^k)_n.
    double c_below = 0.0, c_self = 0.0, c_above = 0.0;
    if (n == kMinClass) {
      c_self = -2.0 * b;
      c_above = 3.0 * up;
    } else if (n == N) {
      c_below = b * (N - 1);
      c_self = -up * N;
    } else {
      c_below = b * (n - 1);
      c_self = -kappa_mid * n;
      c_above = up * (n + 1);
    }
    c_below *= gamma;
    c_self *= gamma;
    c_above *= gamma;

    const int kn = grid.singular_index(n);
    d[0] = 0.0;
    d[K] = 0.0;
    for (int k = 1; k < K; ++k) {
      const int v = k - kn;
      double transport;
      if (v > 0)
        transport = v * (g[k + 1] - g[k]);
      else if (v < 0)
        transport = v * (g[k] - g[k - 1]);
      else
        transport = -g[k];
      double coll = c_self * g[k];
      if (below) coll += c_below * below[k];
      if (above) coll += c_above * above[k];
      d[k] = 2.0 * g[k] + transport + coll;
    }
  }
}

RhsEvaluation rhs(const State& state, const Grid& grid, const Parameters& params, double gamma) {
  RhsEvaluation ev{State::zeros(params), gamma};
  rhs_into(state, grid, params, gamma, ev.dg);
  return ev;
}

double stable_dt(const Parameters& params, double gamma_bound) {
  const double eps = params.eps();
  const double max_speed = (params.domain_length + 4.0) / eps;
  const double kappa_max = CouplingWeights::from(params).kappa_max();
  const double rate = max_speed + 1.0 + gamma_bound * kappa_max - 2.0;
  double dt = rate > 0.0 ? params.dt_safety / rate : params.dt_safety * eps;
  return std::min(dt, params.dt_safety * eps);
}

double default_gamma_bound(const Parameters& params, double current_gamma) {
  if (params.beta < 2.0) {
    const double a_priori = 5.0 / (2.0 - params.beta);
    if (current_gamma <= a_priori) return a_priori;
  }
  return 2.0 * current_gamma;
}

State euler_step(const State& state, double dt, const Grid& grid, const Parameters& params) {
  const double g = stabilized_gamma(evaluate_coupling(state, grid, params), grid.eps());
  State next = state;
  if (dt == 0.0) return next;
  const RhsEvaluation ev = rhs(state, grid, params, g);
  auto out = next.raw();
  auto d = ev.dg.raw();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += dt * d[i];
  return next;
}

Projection project_initial(const State& raw, const Parameters& params, const Grid& grid) {
  check_shape(raw, params);
  if (raw.min_interior() < 0.0) throw SingularProjection("raw data must be nonnegative");
  const BlockFunctionals low = block_functionals(raw, grid, 2, 5);
  const BlockFunctionals high = block_functionals(raw, grid, 6, params.n_max);

  // alpha_low * low.c + alpha_high * high.c = 0, alpha_low * low.a + alpha_high * high.a = A.
  const double det = low.constraint * high.area - high.constraint * low.area;
  const double scale = std::abs(low.constraint * high.area) + std::abs(high.constraint * low.area);
  if (!std::isfinite(det) || scale == 0.0 || std::abs(det) <= 1e-14 * scale)
    throw SingularProjection("projection system is singular");
  const double alpha_low = -high.constraint * params.area_target / det;
  const double alpha_high = low.constraint * params.area_target / det;
  if (!(alpha_low > 0.0) || !(alpha_high > 0.0) || !std::isfinite(alpha_low) || !std::isfinite(alpha_high))
    throw SingularProjection("projection requires a nonpositive scaling factor");

  Projection p{raw, alpha_low, alpha_high};
  for (int n = kMinClass; n <= params.n_max; ++n) {
    const double a = n <= 5 ? alpha_low : alpha_high;
    for (double& v : p.state.row(n)) v *= a;
  }
  return p;
}

InitKind parse_init_kind(const std::string& name) {
  if (name == "random") return InitKind::random;
  if (name == "uniform") return InitKind::uniform;
  if (name == "localized") return InitKind::localized;
  throw InvalidParameters("unknown init kind: " + name);
}

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::random:
      return "random";
    case InitKind::uniform:
      return "uniform";
    case InitKind::localized:
      return "localized";
  }
  return "unknown";
}

State make_initial(InitKind kind, const Parameters& params, const Grid& grid) {
  State raw = State::zeros(params);
  const int K = params.cells;
  if (kind == InitKind::uniform) {
    for (int n = kMinClass; n <= params.n_max; ++n)
      for (int k = 1; k < K; ++k) raw.at(n, k) = 1.0;
    return project_initial(raw, params, grid).state;
  }
  if (kind == InitKind::localized) {
    // Unit mass on 0.5 <= xi <= 1.5 in every class.
    for (int n = kMinClass; n <= params.n_max; ++n)
      for (int k = 1; k < K; ++k)
        if (2 * k >= K / params.domain_length && 2 * k <= 3 * (K / params.domain_length)) raw.at(n, k) = 1.0;
    return project_initial(raw, params, grid).state;
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr int kMaxAttempts = 10;
  for (int attempt = 0;; ++attempt) {
    for (int n = kMinClass; n <= params.n_max; ++n)
      for (int k = 1; k < K; ++k) raw.at(n, k) = unit(rng);
    try {
      return project_initial(raw, params, grid).state;
    } catch (const SingularProjection&) {
      if (attempt + 1 >= kMaxAttempts) throw;
    }
  }
}

double residual(const State& state, const Grid& grid, const Parameters& params) {
  const double g = stabilized_gamma(evaluate_coupling(state, grid, params), grid.eps());
  const RhsEvaluation ev = rhs(state, grid, params, g);
  return ev.dg.max_abs_interior() / std::max(state.max_abs_interior(), 1e-30);
}

SteadyStateReport integrate_to_steady(const State& init, const Grid& grid, const Parameters& params,
                                      const SolveOptions& options) {
  check_shape(init, params);
  if (!(options.tol > 0.0)) throw InvalidParameters("tolerance must be positive");

  SteadyStateReport report;
  State current = init;
  State dg = State::zeros(params);
  report.min_g = init.min_interior();

  const double eps = grid.eps();
  double gamma_bound = 0.0;
  double dt = 0.0;
  long since_refresh = 0;

  for (long step = 0;; ++step) {
    const CouplingEvaluation coupling = evaluate_coupling(current, grid, params);
    const double g = stabilized_gamma(coupling, eps);
    report.drift_area = std::max(report.drift_area, std::abs(coupling.moments.A - params.area_target));
    report.drift_constraint = std::max(report.drift_constraint, std::abs(coupling.moments.constraint(eps)));

    rhs_into(current, grid, params, g, dg);
    const double res = dg.max_abs_interior() / std::max(current.max_abs_interior(), 1e-30);

    const bool sample = options.sample_every > 0 && step % options.sample_every == 0;
    if (sample)
      report.history.push_back(
          {step, report.time, res, g, coupling.moments.A, coupling.moments.constraint(eps)});

    if (res <= options.tol || step >= options.max_steps) {
      report.profile = std::move(current);
      report.gamma = g;
      report.residual = res;
      report.steps = step;
      report.converged = res <= options.tol;
      return report;
    }

    if (step == 0 || since_refresh >= options.bound_refresh || g > gamma_bound) {
      gamma_bound = 2.0 * g;
      dt = stable_dt(params, gamma_bound);
      since_refresh = 0;
    }
    ++since_refresh;

    double min_g = report.min_g;
    for (int n = kMinClass; n <= params.n_max; ++n) {
      double* out = current.row(n).data();
      const double* d = dg.row(n).data();
      for (int k = 1; k < params.cells; ++k) {
        out[k] += dt * d[k];
        min_g = std::min(min_g, out[k]);
      }
    }
    report.min_g = min_g;
    report.time += dt;
  }
}

}  // namespace fradkov
