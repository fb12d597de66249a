#include "fradkov/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "fradkov/errors.hpp"
#include "fradkov/summation.hpp"

namespace fradkov {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

// Piecewise-constant reading of one class of a profile: value g^k on
// [(k-1/2) eps, (k+1/2) eps), boundary values on the two half cells at 0 and L.
class PiecewiseRow {
 public:
  PiecewiseRow(const State& profile, int n, double eps) : eps_(eps), cells_(profile.cells()) {
    prefix_.resize(static_cast<std::size_t>(cells_) + 2, 0.0);
    values_.resize(static_cast<std::size_t>(cells_) + 1, 0.0);
    for (int k = 0; k <= cells_; ++k) values_[k] = profile_value(profile, n, k);
    for (int k = 0; k <= cells_; ++k) prefix_[k + 1] = prefix_[k] + values_[k] * width(k);
  }

  /// Integral over [0, x].
  double integral(double x) const {
    if (x <= 0.0) return 0.0;
    const int k = std::clamp(static_cast<int>(std::floor(x / eps_ + 0.5)), 0, cells_);
    return prefix_[k] + values_[k] * (std::min(x, right(k)) - left(k));
  }

 private:
  double left(int k) const { return k == 0 ? 0.0 : (k - 0.5) * eps_; }
  double right(int k) const { return k == cells_ ? cells_ * eps_ : (k + 0.5) * eps_; }
  double width(int k) const { return right(k) - left(k); }

  double eps_;
  int cells_;
  std::vector<double> values_;
  std::vector<double> prefix_;
};

}  // namespace

double IdentityResiduals::max_x() const { return max_of(x_identity); }
double IdentityResiduals::max_y() const { return max_of(y_identity); }

IdentityResiduals verify_steady_identities(const SteadyStateReport& report, const Grid& grid,
                                           const Parameters& params) {
  const State& g = report.profile;
  const Moments m = moments(g, grid, params);
  const std::vector<double> JX = apply_coupling(m.X, params);
  const std::vector<double> JY = apply_coupling(m.Y, params);
  const double G = report.gamma;

  IdentityResiduals r;
  CompensatedSum boundary;
  for (int n = 2; n <= 5; ++n) boundary += (6 - n) * g.at(n, 1);
  r.mass_identity = std::abs(boundary.value() - m.sum_X());
  r.x_identity.resize(m.X.size());
  r.y_identity.resize(m.X.size());
  for (int n = kMinClass; n <= params.n_max; ++n) {
    const std::size_t i = class_slot(n);
    r.x_identity[i] = std::abs((6 - n) * boundary_trace(g, n) - m.X[i] - G * JX[i]);
    r.y_identity[i] = std::abs((6 - n) * m.X[i] - G * JY[i]);
  }
  r.polyhedral = std::abs(m.P);
  r.area = std::abs(m.A - params.area_target);
  return r;
}

DecayWindow DecayWindow::default_for(const Parameters& params) {
  DecayWindow w;
  w.last = params.n_max - 3;
  w.first = std::min(12, std::max(7, params.n_max - 6));
  return w;
}

double phi(double z, double tau) { return 1.0 + tau - tau / z; }

int decay_threshold_class(double beta) {
  const double bound = 12.0 * (1.0 + 2.0 * beta) * (1.0 + 2.0 * beta);
  return static_cast<int>(std::floor(bound)) + 1;
}

DecayDiagnostics decay_diagnostics(std::span<const double> X, double gamma, const Parameters& params,
                                   DecayWindow window) {
  const int N = params.n_max;
  if (X.size() != static_cast<std::size_t>(params.num_classes()))
    throw ShapeMismatch("moment vector must have length N-1");
  if (window.first < kMinClass || window.last > N || window.last <= window.first)
    throw EmptyWindow("decay window must contain at least two classes");

  DecayDiagnostics d;
  d.window = window;
  d.tau = (1.0 + params.beta) / params.beta;
  d.nbar = decay_threshold_class(params.beta);
  auto Xn = [&](int n) { return X[class_slot(n)]; };

  d.z.assign(X.size(), kNaN);
  for (int n = 3; n <= N; ++n)
    if (Xn(n) != 0.0) d.z[class_slot(n)] = (n - 1) * Xn(n - 1) / (n * Xn(n));

  const double gb = gamma * params.beta;
  d.recursion_residual.assign(X.size(), kNaN);
  for (int n = 6; n <= N - 1; ++n)
    d.recursion_residual[class_slot(n)] = d.z[class_slot(n)] - phi(d.z[class_slot(n + 1)], d.tau) + 1.0 / (gb * n);
  d.terminal_residual = std::abs(d.z[class_slot(N)] - d.tau + 1.0 / (gb * N));

  // Least squares fit of ln X_n = intercept + slope * n.
  double sn = 0.0, sy = 0.0, snn = 0.0, sny = 0.0;
  const int count = window.last - window.first + 1;
  for (int n = window.first; n <= window.last; ++n) {
    if (!(Xn(n) > 0.0)) throw EmptyWindow("X_n must be positive on the decay window");
    const double y = std::log(Xn(n));
    sn += n;
    sy += y;
    snn += static_cast<double>(n) * n;
    sny += n * y;
  }
  const double denom = count * snn - sn * sn;
  d.slope = (count * sny - sn * sy) / denom;
  d.intercept = (sy - d.slope * sn) / count;
  return d;
}

DecayDiagnostics decay_diagnostics(const SteadyStateReport& report, const Grid& grid, const Parameters& params,
                                   DecayWindow window) {
  const Moments m = moments(report.profile, grid, params);
  return decay_diagnostics(m.X, report.gamma, params, window);
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::supercritical:
      return "supercritical";
    case Regime::critical:
      return "critical";
    case Regime::subcritical:
      return "subcritical";
    case Regime::non_integrable:
      return "non_integrable";
  }
  return "unknown";
}

Regime classify_regime(double gamma_kappa) {
  if (std::abs(gamma_kappa - 2.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return Regime::critical;
  if (gamma_kappa > 2.0) return Regime::supercritical;
  if (gamma_kappa > 1.0) return Regime::subcritical;
  return Regime::non_integrable;
}

double predicted_ratio(double gamma_kappa) { return (gamma_kappa - 2.0) / (gamma_kappa - 1.0); }

double extrapolated_singular_value(const State& profile, const Grid& grid, int n) {
  const int k = grid.singular_index(n);
  if (k - 2 < 1 || k + 2 > grid.cells() - 1)
    throw TooCloseToBoundary("extrapolation stencil around class " + std::to_string(n) + " leaves the grid");
  const double left = 2.0 * profile.at(n, k - 1) - profile.at(n, k - 2);
  const double right = 2.0 * profile.at(n, k + 1) - profile.at(n, k + 2);
  return 0.5 * (left + right);
}

int SingularityReport::count(Regime regime) const {
  return static_cast<int>(
      std::count_if(entries.begin(), entries.end(), [&](const SingularityEntry& e) { return e.regime == regime; }));
}

SingularityReport classify_singularities(const SteadyStateReport& report, const Grid& grid,
                                         const Parameters& params) {
  const CouplingWeights w = CouplingWeights::from(params);
  const State& g = report.profile;
  const double G = report.gamma;
  const double b = params.beta;
  const int N = params.n_max;

  SingularityReport out;
  for (int n = 6; n <= N; ++n) {
    SingularityEntry e;
    e.n = n;
    e.gamma_kappa = G * w.kappa_of(n);
    e.regime = classify_regime(e.gamma_kappa);
    const int k = grid.singular_index(n);
    const double below = profile_value(g, n - 1, k);
    const double above = n < N ? profile_value(g, n + 1, k) : 0.0;
    const double source = G * (b * (n - 1) * below + (b + 1.0) * (n + 1) * above);
    e.predicted_limit = e.regime == Regime::supercritical ? source / (e.gamma_kappa - 2.0) : kNaN;
    e.grid_value = profile_value(g, n, k);
    e.predicted_ratio = e.gamma_kappa > 1.0 ? predicted_ratio(e.gamma_kappa) : kNaN;
    try {
      e.extrapolated = extrapolated_singular_value(g, grid, n);
      e.measured_ratio = e.grid_value / e.extrapolated;
    } catch (const TooCloseToBoundary&) {
      e.extrapolated = kNaN;
      e.measured_ratio = kNaN;
    }
    out.entries.push_back(e);
  }
  return out;
}

double interpolate_profile(const State& profile, const Grid& grid, int n, double xi) {
  if (n < kMinClass || n > profile.n_max()) return 0.0;
  const double s = std::clamp(xi / grid.eps(), 0.0, static_cast<double>(grid.cells()));
  const int k = std::min(static_cast<int>(std::floor(s)), grid.cells() - 1);
  const double t = s - k;
  return (1.0 - t) * profile_value(profile, n, k) + t * profile_value(profile, n, k + 1);
}

std::vector<OdeSample> integrate_stationary_ode(const State& profile, const Grid& grid, const Parameters& params,
                                                double gamma, int n, OdeInterval interval, double start_value,
                                                OdeDirection direction) {
  if (!(interval.b > interval.a)) throw InvalidParameters("ODE interval must have a < b");
  const double b = params.beta;
  const int N = params.n_max;
  const double kappa = CouplingWeights::from(params).kappa_of(n);
  const double c_below = n > kMinClass ? gamma * b * (n - 1) : 0.0;
  const double c_above = n < N ? gamma * (b + 1.0) * (n + 1) : 0.0;

  // g' = -(2 g + Gamma (J g)_n) / (xi + 6 - n)
  auto slope = [&](double xi, double g) {
    const double jg = -gamma * kappa * g + c_below * interpolate_profile(profile, grid, n - 1, xi) +
                      c_above * interpolate_profile(profile, grid, n + 1, xi);
    return -(2.0 * g + jg) / (xi + 6.0 - n);
  };

  const bool forward = direction == OdeDirection::forward;
  const double eps = grid.eps();
  std::vector<double> nodes;
  for (int k = static_cast<int>(std::floor(interval.a / eps)) + 1; k * eps < interval.b; ++k)
    if (k * eps > interval.a) nodes.push_back(k * eps);
  if (forward) {
    nodes.push_back(interval.b);
  } else {
    std::reverse(nodes.begin(), nodes.end());
    nodes.push_back(interval.a);
  }

  std::vector<OdeSample> out;
  out.reserve(nodes.size());
  double xi = forward ? interval.a : interval.b;
  double g = start_value;
  const double max_step = eps / 10.0;
  for (double target : nodes) {
    const int substeps = std::max(1, static_cast<int>(std::ceil(std::abs(target - xi) / max_step - 1e-9)));
    const double h = (target - xi) / substeps;
    for (int s = 0; s < substeps; ++s) {
      const double k1 = slope(xi, g);
      const double k2 = slope(xi + 0.5 * h, g + 0.5 * h * k1);
      const double k3 = slope(xi + 0.5 * h, g + 0.5 * h * k2);
      const double k4 = slope(xi + h, g + h * k3);
      g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      xi += h;
    }
    xi = target;
    out.push_back({xi, g});
  }
  if (!forward) std::reverse(out.begin(), out.end());
  return out;
}

OdeDirection stable_direction(double gamma_kappa, int n, OdeInterval interval) {
  const bool right_of_singularity = interval.a >= n - 6;
  const bool towards_singularity_is_forward = !right_of_singularity;
  const bool go_towards = gamma_kappa > 2.0;
  return go_towards == towards_singularity_is_forward ? OdeDirection::forward : OdeDirection::backward;
}

double ode_oracle(const SteadyStateReport& report, const Grid& grid, const Parameters& params, int n,
                  OdeInterval interval) {
  if (n < kMinClass || n > params.n_max) throw InvalidParameters("class out of range");
  if (!(interval.b > interval.a) || interval.a < 0.0 || interval.b > params.domain_length)
    throw InvalidParameters("ODE interval must satisfy 0 <= a < b <= L");
  const double margin = 2.0 * grid.eps() * (1.0 - 1e-9);
  for (int p : {n - 7, n - 6, n - 5})
    if (p >= interval.a - margin && p <= interval.b + margin)
      throw IntervalTouchesSingularity("interval comes within 2 eps of xi = " + std::to_string(p));

  const State& g = report.profile;
  const double gamma_kappa = report.gamma * CouplingWeights::from(params).kappa_of(n);
  const OdeDirection dir = stable_direction(gamma_kappa, n, interval);
  const double start = interpolate_profile(g, grid, n, dir == OdeDirection::forward ? interval.a : interval.b);
  const auto samples = integrate_stationary_ode(g, grid, params, report.gamma, n, interval, start, dir);
  double worst = 0.0;
  for (const OdeSample& s : samples)
    worst = std::max(worst, std::abs(s.value - interpolate_profile(g, grid, n, s.xi)));
  return worst;
}

double restricted_l1_difference(const State& a, const Parameters& pa, const State& b, const Parameters& pb,
                                int target_cells) {
  if (pa.domain_length != pb.domain_length) throw InvalidParameters("profiles live on different domains");
  const int L = pa.domain_length;
  const double eps_t = static_cast<double>(L) / target_cells;
  const int classes = std::min(pa.n_max, pb.n_max);

  std::vector<double> breaks;
  breaks.reserve(static_cast<std::size_t>(target_cells) + 2);
  breaks.push_back(0.0);
  for (int k = 1; k <= target_cells; ++k) breaks.push_back((k - 0.5) * eps_t);
  breaks.push_back(L);

  CompensatedSum total;
  for (int n = kMinClass; n <= classes; ++n) {
    const PiecewiseRow ra(a, n, pa.eps());
    const PiecewiseRow rb(b, n, pb.eps());
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      const double lo = breaks[i], hi = breaks[i + 1];
      const double ia = ra.integral(hi) - ra.integral(lo);
      const double ib = rb.integral(hi) - rb.integral(lo);
      total += std::abs(ia - ib);
    }
  }
  return total.value();
}

namespace {

ConvergenceRow row_of(const ConvergenceRun& run) {
  ConvergenceRow r;
  r.eps = run.params.eps();
  r.n_max = run.params.n_max;
  r.gamma = run.report.gamma;
  r.residual = run.report.residual;
  r.steps = run.report.steps;
  r.converged = run.report.converged;
  return r;
}

}  // namespace

std::vector<ConvergenceRow> tabulate_epsilon_convergence(const std::vector<ConvergenceRun>& runs) {
  if (runs.empty()) return {};
  std::vector<const ConvergenceRun*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const ConvergenceRun* x, const ConvergenceRun* y) { return x->params.eps() > y->params.eps(); });
  const ConvergenceRun& finest = *order.back();
  const int coarsest_cells = order.front()->params.cells;

  std::vector<ConvergenceRow> rows;
  for (const ConvergenceRun* run : order) {
    ConvergenceRow r = row_of(*run);
    r.l1_to_reference =
        restricted_l1_difference(run->report.profile, run->params, finest.report.profile, finest.params, coarsest_cells);
    rows.push_back(r);
  }
  return rows;
}

std::vector<ConvergenceRow> tabulate_class_convergence(const std::vector<ConvergenceRun>& runs) {
  if (runs.empty()) return {};
  std::vector<const ConvergenceRun*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const ConvergenceRun* x, const ConvergenceRun* y) {
    return x->params.n_max < y->params.n_max;
  });
  const ConvergenceRun& largest = *order.back();

  std::vector<ConvergenceRow> rows;
  for (const ConvergenceRun* run : order) {
    ConvergenceRow r = row_of(*run);
    const int cells = std::min(run->params.cells, largest.params.cells);
    r.l1_to_reference =
        restricted_l1_difference(run->report.profile, run->params, largest.report.profile, largest.params, cells);
    rows.push_back(r);
  }
  return rows;
}

void run_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

std::vector<ConvergenceRun> solve_all(std::vector<Parameters> configs, const StudyOptions& options) {
  std::vector<ConvergenceRun> runs(configs.size());
  run_parallel(configs.size(), options.workers, [&](std::size_t i) {
    const Grid grid(configs[i]);
    const State init = make_initial(options.init, configs[i], grid);
    runs[i] = {configs[i], integrate_to_steady(init, grid, configs[i], options.solve)};
  });
  return runs;
}

}  // namespace

std::vector<ConvergenceRow> epsilon_convergence(const Parameters& base, std::span<const double> eps_list,
                                                const StudyOptions& options) {
  std::vector<Parameters> configs;
  for (double eps : eps_list) configs.push_back(with_spacing(base, eps));
  return tabulate_epsilon_convergence(solve_all(std::move(configs), options));
}

std::vector<ConvergenceRow> class_convergence(const Parameters& base, std::span<const int> n_list,
                                              const StudyOptions& options) {
  std::vector<Parameters> configs;
  for (int n : n_list) {
    Parameters p = base;
    p.n_max = n;
    p.validate();
    configs.push_back(p);
  }
  return tabulate_class_convergence(solve_all(std::move(configs), options));
}

}  // namespace fradkov
