#include "fradkov/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fradkov/errors.hpp"
#include "fradkov/summation.hpp"

namespace fradkov {

namespace {

int sgn(int v) { return (v > 0) - (v < 0); }

// (J f)_n evaluated on a strided column: value(m) returns f_m for 2 <= m <= N.
template <typename Value>
double coupling_entry(int n, int n_max, double beta, Value value) {
  if (n == kMinClass) return 3.0 * (beta + 1.0) * value(3) - 2.0 * beta * value(2);
  if (n == n_max) return beta * (n_max - 1) * value(n_max - 1) - (beta + 1.0) * n_max * value(n_max);
  return (beta + 1.0) * (n + 1) * value(n + 1) - (2.0 * beta + 1.0) * n * value(n) +
         beta * (n - 1) * value(n - 1);
}

}  // namespace

std::vector<std::string> Parameters::validate() const {
  std::vector<std::string> warnings;
  if (!std::isfinite(beta) || beta <= 0.0) throw InvalidParameters("beta must be positive and finite");
  if (n_max < 7) throw InvalidParameters("n_max must be at least 7");
  if (domain_length <= n_max - 6) throw InvalidParameters("domain_length must exceed n_max - 6");
  if (cells <= 0 || cells % domain_length != 0)
    throw InvalidParameters("cells must be a positive multiple of domain_length");
  if (!std::isfinite(area_target) || area_target <= 0.0) throw InvalidParameters("area must be positive");
  if (!(dt_safety > 0.0 && dt_safety < 1.0)) throw InvalidParameters("dt_safety must lie in (0,1)");
  if (beta >= 2.0) warnings.emplace_back("beta >= 2: Gamma bounds and positivity guarantees do not apply");
  return warnings;
}

Parameters with_spacing(Parameters p, double eps) {
  const double cells = p.domain_length / eps;
  const double rounded = std::round(cells);
  if (!(eps > 0.0) || std::abs(cells - rounded) > 1e-9 * rounded)
    throw InvalidParameters("spacing does not divide the domain length");
  p.cells = static_cast<int>(rounded);
  p.validate();
  return p;
}

Grid::Grid(const Parameters& params)
    : eps_(params.eps()), cells_(params.cells), domain_length_(params.domain_length) {
  params.validate();
}

State::State(int n_max, int cells)
    : n_max_(n_max),
      cells_(cells),
      data_(static_cast<std::size_t>(n_max - 1) * static_cast<std::size_t>(cells + 1), 0.0) {}

double State::min_interior() const {
  double m = std::numeric_limits<double>::infinity();
  for (int n = kMinClass; n <= n_max_; ++n)
    for (int k = 1; k < cells_; ++k) m = std::min(m, at(n, k));
  return m;
}

double State::max_abs_interior() const {
  double m = 0.0;
  for (int n = kMinClass; n <= n_max_; ++n)
    for (int k = 1; k < cells_; ++k) m = std::max(m, std::abs(at(n, k)));
  return m;
}

State& State::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double Moments::sum_X() const {
  CompensatedSum s;
  for (double x : X) s += x;
  return s.value();
}

CouplingWeights CouplingWeights::from(const Parameters& params) {
  CouplingWeights w;
  const double b = params.beta;
  const int N = params.n_max;
  w.kappa.resize(static_cast<std::size_t>(params.num_classes()));
  w.kappa[class_slot(2)] = 2.0 * b;
  for (int n = 3; n <= N - 1; ++n) w.kappa[class_slot(n)] = (2.0 * b + 1.0) * n;
  w.kappa[class_slot(N)] = (b + 1.0) * N;
  w.tau = (1.0 + b) / b;
  return w;
}

double CouplingWeights::kappa_max() const { return *std::max_element(kappa.begin(), kappa.end()); }

std::vector<double> apply_coupling(std::span<const double> f, const Parameters& params) {
  if (f.size() != static_cast<std::size_t>(params.num_classes()))
    throw ShapeMismatch("coupling input must have length N-1");
  std::vector<double> out(f.size());
  auto value = [&](int m) { return f[class_slot(m)]; };
  for (int n = kMinClass; n <= params.n_max; ++n)
    out[class_slot(n)] = coupling_entry(n, params.n_max, params.beta, value);
  return out;
}

Moments moments(const State& state, const Grid& grid, const Parameters& params) {
  if (state.n_max() != params.n_max || state.cells() != params.cells)
    throw ShapeMismatch("state shape does not match parameters");
  const int N = params.n_max;
  const int K = params.cells;
  const double eps = grid.eps();

  Moments m;
  m.X.assign(static_cast<std::size_t>(params.num_classes()), 0.0);
  m.Y.assign(m.X.size(), 0.0);
  CompensatedSum q, area, defect;
  for (int n = kMinClass; n <= N; ++n) {
    CompensatedSum x, y;
    for (int k = 1; k < K; ++k) {
      const double g = state.at(n, k);
      x += g;
      y += grid.xi(k) * g;
      const int s = sgn(grid.speed_index(n, k));
      if (s != 0) q += s * g;
    }
    m.X[class_slot(n)] = eps * x.value();
    m.Y[class_slot(n)] = eps * y.value();
  }
  for (int n = kMinClass; n <= N; ++n) {
    area += m.Y[class_slot(n)];
    defect += (n - 6) * m.X[class_slot(n)];
  }
  m.Q = eps * q.value();
  m.A = area.value();
  m.P = defect.value();
  return m;
}

CouplingEvaluation evaluate_coupling(const State& state, const Grid& grid, const Parameters& params) {
  if (state.n_max() != params.n_max || state.cells() != params.cells)
    throw ShapeMismatch("state shape does not match parameters");
  const int N = params.n_max;
  const int K = params.cells;
  const double eps = grid.eps();
  const double beta = params.beta;

  CompensatedSum num;
  for (int n = 2; n <= 5; ++n) num += (6 - n) * (6 - n - eps) * state.at(n, 1);

  CouplingEvaluation ev;
  ev.moments = moments(state, grid, params);
  const Moments& m = ev.moments;
  const std::vector<double> JX = apply_coupling(m.X, params);
  CompensatedSum head, tail;
  for (int n = kMinClass; n <= N; ++n) head += (6 - n) * JX[class_slot(n)];
  for (int n = kMinClass; n <= N; ++n) {
    for (int k = 1; k < K; ++k) {
      const int s = sgn(grid.speed_index(n, k));
      if (s == 0) continue;
      const double Jg = coupling_entry(n, N, beta, [&](int c) { return state.at(c, k); });
      tail += s * Jg;
    }
  }

  GammaParts& out = ev.gamma;
  out.num = num.value();
  out.den = head.value() - eps * eps * tail.value();
  if (!(out.den > 0.0)) throw NonpositiveDenominator(out.num, out.den);
  out.value = out.num / out.den;
  return ev;
}

GammaParts gamma(const State& state, const Grid& grid, const Parameters& params) {
  return evaluate_coupling(state, grid, params).gamma;
}

double stabilized_gamma(const CouplingEvaluation& coupling, double eps) {
  const double c = coupling.moments.constraint(eps);
  return (coupling.gamma.num + 2.0 * c) / coupling.gamma.den;
}

double boundary_trace(const State& state, int n) { return n <= 5 ? state.at(n, 1) : 0.0; }

double profile_value(const State& state, int n, int k) {
  if (k <= 0) return boundary_trace(state, n);
  if (k >= state.cells()) return 0.0;
  return state.at(n, k);
}

}  // namespace fradkov
