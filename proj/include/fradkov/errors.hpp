#pragma once

#include <stdexcept>
#include <string>

namespace fradkov {

/// Base for every error raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters violate a structural invariant (N, L, K, beta, ...).
class InvalidParameters : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Gamma_den <= 0: the state has left the regime where the coupling weight is defined.
class NonpositiveDenominator : public Error {
 public:
  NonpositiveDenominator(double num, double den)
      : Error("coupling weight denominator is not positive (num=" + std::to_string(num) +
              ", den=" + std::to_string(den) + ")"),
        numerator(num),
        denominator(den) {}
  double numerator;
  double denominator;
};

/// The two-factor projection onto the admissible set has no positive solution.
class SingularProjection : public Error {
 public:
  using Error::Error;
};

class EmptyWindow : public Error {
 public:
  using Error::Error;
};

class TooCloseToBoundary : public Error {
 public:
  using Error::Error;
};

class IntervalTouchesSingularity : public Error {
 public:
  using Error::Error;
};

}  // namespace fradkov
