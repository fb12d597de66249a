#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fradkov {

// Per-class vectors (X, Y, kappa, J f, ...) have length N-1; entry n-2 belongs to class n.
inline constexpr int kMinClass = 2;
inline constexpr std::size_t class_slot(int n) { return static_cast<std::size_t>(n - kMinClass); }

/// Problem definition. Grid spacing is eps = domain_length / cells.
struct Parameters {
  double beta = 1.0;
  int n_max = 25;          // N, maximal topological class
  int domain_length = 20;  // L
  int cells = 400;         // K
  double area_target = 1.0;
  double dt_safety = 0.9;
  std::uint64_t seed = 1;

  double eps() const { return static_cast<double>(domain_length) / cells; }
  int num_classes() const { return n_max - 1; }

  /// Throws InvalidParameters on a structural violation; returns non-fatal warnings.
  std::vector<std::string> validate() const;
};

/// Parameters for the given spacing eps; throws unless L/eps is an integer.
Parameters with_spacing(Parameters p, double eps);

class Grid {
 public:
  explicit Grid(const Parameters& params);

  double eps() const { return eps_; }
  int cells() const { return cells_; }
  int domain_length() const { return domain_length_; }
  double xi(int k) const { return k * eps_; }

  /// k_n = (n-6) K / L; every singular point n-6 with n >= 6 is a grid point.
  int singular_index(int n) const { return (n - 6) * cells_ / domain_length_; }

  /// (xi_k + 6 - n) / eps, an exact integer.
  int speed_index(int n, int k) const { return k - singular_index(n); }

 private:
  double eps_;
  int cells_;
  int domain_length_;
};

/// Number densities g_n^k for n = 2..N and k = 0..K. Columns k = 0 and k = K are ghosts
/// holding the boundary values (always zero in storage; never updated by the scheme).
class State {
 public:
  State() = default;
  State(int n_max, int cells);
  static State zeros(const Parameters& params) { return State(params.n_max, params.cells); }

  int n_max() const { return n_max_; }
  int cells() const { return cells_; }

  double& at(int n, int k) { return data_[index(n, k)]; }
  double at(int n, int k) const { return data_[index(n, k)]; }

  /// Row of class n including both ghosts, length K+1.
  std::span<double> row(int n) { return {data_.data() + index(n, 0), static_cast<std::size_t>(cells_ + 1)}; }
  std::span<const double> row(int n) const {
    return {data_.data() + index(n, 0), static_cast<std::size_t>(cells_ + 1)};
  }

  std::span<double> raw() { return data_; }
  std::span<const double> raw() const { return data_; }

  /// Minimum over interior entries.
  double min_interior() const;
  /// Sup norm over interior entries.
  double max_abs_interior() const;

  State& operator*=(double s);
  friend State operator*(double s, State g) { return g *= s; }
  bool operator==(const State&) const = default;

 private:
  std::size_t index(int n, int k) const {
    return static_cast<std::size_t>(n - kMinClass) * static_cast<std::size_t>(cells_ + 1) +
           static_cast<std::size_t>(k);
  }

  int n_max_ = 0;
  int cells_ = 0;
  std::vector<double> data_;
};

struct Moments {
  std::vector<double> X;  // eps sum_k g_n^k
  std::vector<double> Y;  // eps sum_k xi_k g_n^k
  double Q = 0.0;         // eps sum_{n,k} sgn(xi_k + 6 - n) g_n^k, sgn(0) = 0
  double A = 0.0;         // sum_n Y_n
  double P = 0.0;         // sum_n (n-6) X_n

  double sum_X() const;
  /// P + eps Q, the constrained combination that the dynamics conserves.
  double constraint(double eps) const { return P + eps * Q; }
};

struct CouplingWeights {
  std::vector<double> kappa;  // modulus of the diagonal of J
  double tau = 0.0;           // (1 + beta) / beta

  static CouplingWeights from(const Parameters& params);
  double kappa_of(int n) const { return kappa[class_slot(n)]; }
  double kappa_max() const;
};

struct GammaParts {
  double num = 0.0;
  double den = 0.0;
  double value = 0.0;
};

/// Collision operator J (three-band, zero column sums).
std::vector<double> apply_coupling(std::span<const double> f, const Parameters& params);

Moments moments(const State& state, const Grid& grid, const Parameters& params);

/// Self-consistent coupling weight; throws NonpositiveDenominator when Gamma_den <= 0.
GammaParts gamma(const State& state, const Grid& grid, const Parameters& params);

struct CouplingEvaluation {
  GammaParts gamma;
  Moments moments;
};

/// gamma() together with the moments it was computed from.
CouplingEvaluation evaluate_coupling(const State& state, const Grid& grid, const Parameters& params);

/// Coupling weight used by the time integrator: (Gamma_num + 2 c) / Gamma_den with
/// c = P + eps Q. Equals gamma().value on the admissible set (c = 0) and makes c decay like
/// exp(-t) instead of growing like exp(t) from rounding.
double stabilized_gamma(const CouplingEvaluation& coupling, double eps);

/// Boundary trace used by the continuum identities: g_n(0) = g_n^1 for n <= 5, else 0.
double boundary_trace(const State& state, int n);

/// g_n^k for interior k; boundary values at the ghosts (k = 0: boundary_trace, k = K: 0).
double profile_value(const State& state, int n, int k);

}  // namespace fradkov
