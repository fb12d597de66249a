#include <cmath>
#include <random>

#include "doctest.h"
#include "fradkov/diagnostics.hpp"
#include "fradkov/errors.hpp"
#include "oracles.hpp"

using namespace fradkov;

namespace {

Parameters small(double beta = 1.0, int n_max = 8, int length = 4, int cells = 40) {
  Parameters p;
  p.beta = beta;
  p.n_max = n_max;
  p.domain_length = length;
  p.cells = cells;
  return p;
}

// Stationary equations on the grid N = 7, L = K = 2, whose only interior cell is k = 1:
// (n - 5) g_n + Gamma (J g)_n = 0 for n <= 6 and g_7 + Gamma (J g)_7 = 0.
// Forward elimination in n fixes g_3..g_7 from g_2 = 1; the last row is the defect.
std::vector<double> two_cell_forward(double G, double b, double& defect) {
  std::vector<double> g(8, 0.0);
  g[2] = 1.0;
  g[3] = (3.0 * g[2] + G * 2.0 * b * g[2]) / (G * 3.0 * (b + 1.0));
  for (int n = 3; n <= 6; ++n) {
    const double diag = (n - 5.0) - G * (2.0 * b + 1.0) * n;
    g[n + 1] = -(diag * g[n] + G * b * (n - 1) * g[n - 1]) / (G * (b + 1.0) * (n + 1));
  }
  defect = g[7] + G * (b * 6 * g[6] - (b + 1.0) * 7 * g[7]);
  return g;
}

}  // namespace

TEST_CASE("identities hold exactly for a hand-built two-cell steady state") {
  const double b = 1.0;
  double lo = 0.0, hi = 0.0, dlo = 0.0;
  // first sign change of the defect on a scan, then bisection
  double prev_G = 0.01, prev_d;
  two_cell_forward(prev_G, b, prev_d);
  for (double G = 0.02; G < 20.0; G += 0.01) {
    double d;
    two_cell_forward(G, b, d);
    if ((d > 0) != (prev_d > 0)) {
      lo = prev_G;
      hi = G;
      dlo = prev_d;
      break;
    }
    prev_G = G;
    prev_d = d;
  }
  REQUIRE(hi > 0.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double d;
    two_cell_forward(mid, b, d);
    if ((d > 0) == (dlo > 0)) lo = mid;
    else hi = mid;
  }
  double defect;
  const double G = 0.5 * (lo + hi);
  const auto g = two_cell_forward(G, b, defect);

  Parameters p = small(b, 7, 2, 2);
  const Grid grid(p);
  SteadyStateReport report;
  report.profile = State::zeros(p);
  double scale = 0.0;
  for (int n = 2; n <= 7; ++n) {
    report.profile.at(n, 1) = g[n];
    scale = std::max(scale, std::abs(g[n]));
  }
  report.gamma = G;
  report.profile *= 1.0 / scale;

  const State dg = oracle::rhs(report.profile, p, G);
  CHECK(dg.max_abs_interior() <= 1e-12);
  const IdentityResiduals r = verify_steady_identities(report, grid, p);
  CHECK(r.max_x() <= 1e-12);
}

TEST_CASE("identities of the zero profile") {
  const Parameters p;
  const Grid g(p);
  SteadyStateReport report;
  report.profile = State::zeros(p);
  report.gamma = 0.5;
  const IdentityResiduals r = verify_steady_identities(report, g, p);
  CHECK(r.mass_identity == 0.0);
  CHECK(r.max_x() == 0.0);
  CHECK(r.max_y() == 0.0);
  CHECK(r.polyhedral == 0.0);
  CHECK(r.area == p.area_target);
}

TEST_CASE("recursion map") {
  for (double beta : {0.1, 0.5, 1.0, 1.5, 3.0}) {
    const double tau = (1.0 + beta) / beta;
    CHECK(phi(1.0, tau) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(phi(tau, tau) == doctest::Approx(tau).epsilon(1e-15));
    double prev = phi(1e-3, tau);
    for (double z = 2e-3; z < 50.0; z *= 1.1) {
      const double v = phi(z, tau);
      CHECK(v > prev);
      prev = v;
    }
  }
  CHECK(decay_threshold_class(1.0) == 109);
  CHECK(decay_threshold_class(0.5) == 49);
}

TEST_CASE("decay diagnostics on a synthetic geometric sequence") {
  Parameters p;
  p.beta = 1.0;
  const double tau = 2.0, c = 0.3, G = 0.7;
  std::vector<double> X(p.num_classes());
  for (int n = 2; n <= p.n_max; ++n) X[class_slot(n)] = c * std::pow(tau, -n) / n;
  const DecayDiagnostics d = decay_diagnostics(X, G, p, DecayWindow::default_for(p));
  CHECK(d.tau == 2.0);
  CHECK(d.nbar == 109);
  CHECK(d.window.first == 12);
  CHECK(d.window.last == 22);
  CHECK(std::isnan(d.z[class_slot(2)]));
  for (int n = 3; n <= p.n_max; ++n) CHECK(d.z[class_slot(n)] == doctest::Approx(tau).epsilon(1e-13));
  // z is the fixed point of Phi, so only the 1/(Gamma beta n) term survives, with a plus sign.
  for (int n = 6; n <= p.n_max - 1; ++n)
    CHECK(d.recursion_residual[class_slot(n)] == doctest::Approx(1.0 / (G * p.beta * n)).epsilon(1e-12));
  CHECK(std::isnan(d.recursion_residual[class_slot(5)]));
  CHECK(d.terminal_residual == doctest::Approx(1.0 / (G * p.beta * p.n_max)).epsilon(1e-12));

  // ln X_n = ln c - n ln tau - ln n: the fitted slope sits just below -ln tau.
  CHECK(d.slope < -std::log(tau));
  CHECK(d.slope > -std::log(tau) - 0.1);

  std::vector<double> pure(p.num_classes());
  for (int n = 2; n <= p.n_max; ++n) pure[class_slot(n)] = std::exp(1.5 - 0.4 * n);
  const DecayDiagnostics e = decay_diagnostics(pure, G, p, {5, 20});
  CHECK(e.slope == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(e.intercept == doctest::Approx(1.5).epsilon(1e-12));

  CHECK_THROWS_AS(decay_diagnostics(pure, G, p, {12, 12}), EmptyWindow);
  pure[class_slot(15)] = 0.0;
  CHECK_THROWS_AS(decay_diagnostics(pure, G, p, {12, 22}), EmptyWindow);
}

TEST_CASE("singularity regimes") {
  CHECK(classify_regime(21.0) == Regime::supercritical);
  CHECK(predicted_ratio(21.0) == doctest::Approx(19.0 / 20.0));
  CHECK(classify_regime(2.0) == Regime::critical);
  CHECK(classify_regime(1.5) == Regime::subcritical);
  CHECK(classify_regime(0.05 * 18) == Regime::non_integrable);
  CHECK(classify_regime(1.0) == Regime::non_integrable);
  for (double gk = 2.01; gk < 100.0; gk *= 1.3) {
    CHECK(predicted_ratio(gk) > 0.0);
    CHECK(predicted_ratio(gk) < 1.0);
  }

  const Parameters p;
  const Grid g(p);
  SteadyStateReport report;
  report.profile = State::zeros(p);
  report.gamma = 1.0;
  for (int n = 2; n <= p.n_max; ++n)
    for (int k = 1; k < p.cells; ++k) report.profile.at(n, k) = 3.0 + 0.25 * k;
  const SingularityReport s = classify_singularities(report, g, p);
  REQUIRE(s.entries.size() == static_cast<std::size_t>(p.n_max - 5));
  CHECK(s.entries[1].n == 7);
  CHECK(s.entries[1].gamma_kappa == 21.0);
  CHECK(s.entries[1].predicted_ratio == doctest::Approx(0.95));
  // a linear profile is reproduced exactly by the extrapolation
  CHECK(s.entries[1].measured_ratio == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.count(Regime::supercritical) == p.n_max - 5);
  // n = 6 has k_6 = 0, so the stencil leaves the grid
  CHECK(std::isnan(s.entries[0].measured_ratio));
  CHECK_THROWS_AS(extrapolated_singular_value(report.profile, g, 6), TooCloseToBoundary);
  CHECK(extrapolated_singular_value(report.profile, g, 7) == doctest::Approx(3.0 + 0.25 * g.singular_index(7)));
}

TEST_CASE("stationary ODE against closed forms") {
  const Parameters p;
  const Grid g(p);
  const State zero = State::zeros(p);
  SteadyStateReport report;
  report.profile = zero;
  report.gamma = 0.8;
  CHECK(ode_oracle(report, g, p, 2, {0.5, 3.5}) == 0.0);

  // Gamma = 0: g = ((a + 6 - n) / (xi + 6 - n))^2
  const double a = 0.5;
  const auto plain = integrate_stationary_ode(zero, g, p, 0.0, 2, {a, 3.5}, 1.0);
  REQUIRE(!plain.empty());
  CHECK(plain.back().xi == 3.5);
  double worst = 0.0;
  for (const auto& s : plain) worst = std::max(worst, std::abs(s.value - std::pow((a + 4.0) / (s.xi + 4.0), 2)));
  CHECK(worst <= 1e-8);

  // Gamma > 0 with empty neighbours: g = ((xi + 6 - n) / (a + 6 - n))^(Gamma kappa - 2), which grows
  // to 3^7 here, so the comparison is relative.
  const int n = 10;
  const double G = 0.3, kappa = 3.0 * n;
  const auto powered = integrate_stationary_ode(zero, g, p, G, n, {5.5, 8.5}, 1.0);
  worst = 0.0;
  for (const auto& s : powered)
    worst = std::max(worst, std::abs(s.value / std::pow((s.xi - 4.0) / 1.5, G * kappa - 2.0) - 1.0));
  CHECK(worst <= 1e-8);

  // the same solution integrated from the far end
  const double end_value = std::pow(4.5 / 1.5, G * kappa - 2.0);
  const auto back = integrate_stationary_ode(zero, g, p, G, n, {5.5, 8.5}, end_value, OdeDirection::backward);
  REQUIRE(back.size() == powered.size());
  CHECK(back.front().xi == 5.5);
  CHECK(back.back().xi < 8.5);
  worst = 0.0;
  for (const auto& s : back)
    worst = std::max(worst, std::abs(s.value / std::pow((s.xi - 4.0) / 1.5, G * kappa - 2.0) - 1.0));
  CHECK(worst <= 1e-8);

  CHECK(stable_direction(13.0, 10, {5.5, 8.5}) == OdeDirection::backward);
  CHECK(stable_direction(13.0, 10, {0.5, 2.5}) == OdeDirection::forward);
  CHECK(stable_direction(0.9, 2, {0.5, 3.5}) == OdeDirection::forward);
  CHECK(stable_direction(1.5, 10, {0.5, 2.5}) == OdeDirection::backward);

  CHECK_THROWS_AS(ode_oracle(report, g, p, 10, {2.5, 3.95}), IntervalTouchesSingularity);
  CHECK_THROWS_AS(ode_oracle(report, g, p, 10, {3.5, 4.5}), IntervalTouchesSingularity);
  CHECK_NOTHROW(ode_oracle(report, g, p, 10, {0.5, 2.5}));
  CHECK_THROWS_AS(ode_oracle(report, g, p, 10, {2.0, 1.0}), InvalidParameters);
}

TEST_CASE("profile interpolation") {
  const Parameters p = small();
  const Grid g(p);
  State s = State::zeros(p);
  for (int k = 1; k < p.cells; ++k) s.at(8, k) = k;
  CHECK(interpolate_profile(s, g, 8, 5 * g.eps()) == doctest::Approx(5.0));
  CHECK(interpolate_profile(s, g, 8, 5.5 * g.eps()) == doctest::Approx(5.5));
  CHECK(interpolate_profile(s, g, 8, 0.5 * g.eps()) == doctest::Approx(0.5));
  CHECK(interpolate_profile(s, g, 8, p.domain_length) == 0.0);
  CHECK(interpolate_profile(s, g, 99, 1.0) == 0.0);
}

TEST_CASE("restricted L1 difference") {
  std::mt19937_64 rng(17);
  const Parameters p = small();
  State a = oracle::random_state(p, rng);
  for (int n = 2; n <= 6; ++n)
    for (int k = 1; k < p.cells; ++k) a.at(n, k) = 0.0;
  const State zero = State::zeros(p);
  CHECK(restricted_l1_difference(a, p, a, p, p.cells) == 0.0);
  const double mass = oracle::moments(a, p).X[8 - 2] + oracle::moments(a, p).X[7 - 2];
  CHECK(restricted_l1_difference(a, p, zero, p, p.cells) == doctest::Approx(mass).epsilon(1e-13));
  // restriction to a coarser grid can only merge cells, which never increases the distance
  const State b = oracle::random_state(p, rng);
  const double fine = restricted_l1_difference(a, p, b, p, p.cells);
  const double coarse = restricted_l1_difference(a, p, b, p, p.cells / 4);
  CHECK(coarse <= fine + 1e-12);
  CHECK(restricted_l1_difference(b, p, a, p, p.cells / 4) == doctest::Approx(coarse));

  Parameters q = p;
  q.domain_length = 5;
  CHECK_THROWS_AS(restricted_l1_difference(a, p, a, q, 10), InvalidParameters);
}

TEST_CASE("worker pool") {
  std::vector<int> hits(37, 0);
  run_parallel(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(run_parallel(5, 3,
                               [](std::size_t i) {
                                 if (i == 2) throw EmptyWindow("boom");
                               }),
                  EmptyWindow);
  run_parallel(0, 4, [](std::size_t) { FAIL("no jobs expected"); });
}

TEST_CASE("refinement tables") {
  Parameters p = small(1.0, 8, 4, 20);
  StudyOptions opt;
  opt.solve.tol = 1e-9;
  opt.workers = 2;
  const std::vector<double> eps{0.1, 0.2};
  const auto rows = epsilon_convergence(p, eps, opt);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].eps == doctest::Approx(0.2));
  CHECK(rows[1].eps == doctest::Approx(0.1));
  CHECK(rows[1].l1_to_reference == 0.0);
  CHECK(rows[0].l1_to_reference > 0.0);
  CHECK(rows[0].converged);
  CHECK(rows[1].converged);

  const std::vector<double> single{0.2};
  const auto one = epsilon_convergence(p, single, opt);
  REQUIRE(one.size() == 1);
  CHECK(one[0].l1_to_reference == 0.0);

  const std::vector<int> classes{9, 8};
  p.domain_length = 4;
  const auto by_class = class_convergence(p, classes, opt);
  REQUIRE(by_class.size() == 2);
  CHECK(by_class[0].n_max == 8);
  CHECK(by_class[1].l1_to_reference == 0.0);
  CHECK_THROWS_AS(epsilon_convergence(p, std::vector<double>{0.3}, opt), InvalidParameters);
}
