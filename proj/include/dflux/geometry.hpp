#pragma once

#include <vector>

#include "dflux/flux.hpp"

namespace dflux {

/// x~_j = x_j - zeta(x^_j); other coordinates unchanged.
Point flatten(const Interface& iface, const Point& x);
Point unflatten(const Interface& iface, const Point& xt);

/// F^j(x~, lambda) = f^j(x(x~), lambda) - zeta'(x^_j) f^t(x(x~), lambda) for one side of
/// the model, where x(x~) undoes the flattening. In one dimension this is f^1 itself.
FluxComponent transformed_normal_flux(const PiecewiseFlux& model, Side side);

/// The model written in flattened coordinates: normal components replaced by
/// transformed_normal_flux, tangential ones composed with unflatten, and the
/// interface moved to {x~_j = 0}.
PiecewiseFlux flatten_model(const PiecewiseFlux& model);

/// field(c + R (x - c)/|x - c|) outside B(c, R), field(x) inside.
ScalarField radial_extend(ScalarField field, const Point& center, double radius, int d);
FluxComponent radial_extend(const FluxComponent& component, const Point& center, double radius, int d);
/// Both sides extended; the interface and its Heaviside stay global.
PiecewiseFlux radial_extend(const PiecewiseFlux& model, const Point& center, double radius);

/// Closest point of the closed ball B(c, R) to x along the ray from c.
Point radial_projection(const Point& x, const Point& center, double radius, int d);

/// Sample grid for the derivative maxima: a tensor grid of `x_samples` points
/// per axis restricted to B(center, R), and `lambda_samples` equispaced states.
struct SampleGrid {
  Point center{0.0, 0.0};
  int x_samples = 33;
  int lambda_samples = 2001;
};

struct DerivativeBound {
  double value = 0.0;
  SampleGrid grid;
  double radius = 0.0;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  Point witness_x{};
  double witness_lambda = 0.0;
  int points = 0;
};

/// N = max over the sample of sqrt(sum_j |d_lambda f_L^j|^2 + |d_lambda f_R^j|^2),
/// for x in B(center, R) and lambda in [max(a, -M), min(b, M)]. A model without a
/// jump contributes its single flux once. Throws DomainError for an empty sample.
DerivativeBound speed_bound(const PiecewiseFlux& model, double radius, double state_bound,
                            const SampleGrid& grid = {});

/// C = max over the sample of sqrt(sum_j |d2_{x_j lambda} f_L^j|^2 + |d2_{x_j lambda} f_R^j|^2).
DerivativeBound mixed_derivative_bound(const PiecewiseFlux& model, double radius, double state_bound,
                                       const SampleGrid& grid = {});

struct Cone {
  int d = 1;
  Point center{0.0, 0.0};
  double R = 1.0;
  double N = 1.0;

  double section_radius(double t) const { return R - N * t; }
  double height() const { return R / N; }
};

/// |x~ - center| < R - N t and t < R / N.
bool cone_contains(const Cone& cone, double t, const Point& xt);

/// 1 - omega(A_i) omega(A_j) with A = (|x~ - c| + N t - R + eps)/eps.
double cone_cutoff_chi_raw(const Cone& ci, const Cone& cj, double eps, double t, const Point& xt);
/// The raw cutoff multiplied by (1 - omega(A_i))(1 - omega(A_j)), so it vanishes
/// outside the intersection of the two cones.
double cone_cutoff_chi(const Cone& ci, const Cone& cj, double eps, double t, const Point& xt);

/// A chart B(x_l, r_l) around a piece of interface, with flattened radius R_l.
struct Chart {
  Point center{0.0, 0.0};
  double r = 1.0;
  Interface iface;
  double R = 0.5;

  Point flattened_center() const { return flatten(iface, center); }
};

struct ChartReport {
  bool pass = true;
  std::string reason;
  double worst_distance = 0.0;
  Point witness{};
};

/// Checks R_l > 0 and that unflatten(B(x~_l, R_l)) lies inside B(x_l, r_l) on a sample.
ChartReport validate_chart(const Chart& chart, int samples = 4096);

struct Ball {
  Point center{0.0, 0.0};
  double radius = 0.0;
};

/// Per axis j a finite union of balls covering the eps-neighbourhood Q_j^eps.
struct ExclusionSets {
  int d = 1;
  double eps = 0.0;
  std::vector<std::vector<Ball>> per_axis;
};

struct ExclusionReport {
  bool pass = true;
  double min_gap = 0.0;
  int axis_i = -1;
  int axis_j = -1;
  int ball_i = -1;
  int ball_j = -1;
};

/// Pairwise disjointness across axes: |c1 - c2| >= r1 + r2 + 2 eps for balls of different axes.
ExclusionReport check_exclusion_sets(const ExclusionSets& sets);

struct TimeHorizon {
  /// Smallest height at which two base-overlapping cones stop intersecting; +inf if none.
  double pairwise_min = 0.0;
  /// Largest height at which a cone still meets an exclusion cylinder; 0 if none meets one.
  double cylinder_max = 0.0;
  /// min(pairwise_min, cylinder height when positive, min cone height).
  double t1 = 0.0;
};

TimeHorizon time_horizon(const std::vector<Cone>& cones, const std::vector<Ball>& cylinders);

}  // namespace dflux
