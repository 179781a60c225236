#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dflux {

/// Largest spatial dimension the grids and solvers support.
inline constexpr int kMaxDim = 2;

/// A point of R^d stored in a fixed two-slot array; unused slots stay zero.
using Point = std::array<double, kMaxDim>;

/// One value per spatial axis.
using FluxVector = std::array<double, kMaxDim>;

enum class Side { Left, Right };

/// Thrown when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown by the time integrator (CFL violations, non-finite values).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a study would exceed its configured resource budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double norm(const Point& x, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += x[k] * x[k];
  return std::sqrt(s);
}

inline double distance(const Point& x, const Point& y, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

inline double sgn(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
  int d = 1;
  Point lo{-1.0, -1.0};
  Point hi{1.0, 1.0};

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < d; ++k) v *= hi[k] - lo[k];
    return v;
  }
  bool contains(const Point& x) const {
    for (int k = 0; k < d; ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
  }
};

/// Radical-inverse Halton sequence value for index i >= 1 in the given prime base.
inline double halton(unsigned i, unsigned base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace dflux
