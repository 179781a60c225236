#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dflux/types.hpp"

namespace dflux {

using ScalarField = std::function<double(const Point&, double)>;
using AxisField = std::function<double(const Point&, double, int)>;

/// C^2 cubic smoothstep: 0 for z <= -1, 1 for z >= 1, 3s^2 - 2s^3 with s = (z+1)/2 between.
double smoothstep(double z);
double smoothstep_derivative(double z);

/// One axis component f^k(x, lambda) of a flux on one side of an interface.
///
/// The derivative members are optional. When a member is empty the
/// corresponding accessor falls back to a central difference of `value`.
struct FluxComponent {
  int axis = 0;
  ScalarField value;
  ScalarField lambda_derivative;
  AxisField x_derivative;
  AxisField x_derivative_of_lambda_derivative;

  double operator()(const Point& x, double lambda) const { return value(x, lambda); }
  double d_lambda(const Point& x, double lambda) const;
  double d_x(const Point& x, double lambda, int k) const;
  double d_x_lambda(const Point& x, double lambda, int k) const;
};

enum class XModulation { None, Affine };

/// f(x, lambda) = m(x) * sum_i c_i lambda^i, with m(x) = 1 (None) or
/// m(x) = x_coeffs[0] + sum_k x_coeffs[k+1] x_k (Affine).
FluxComponent polynomial_component(int axis, std::vector<double> poly_lambda,
                                   XModulation modulation = XModulation::None,
                                   std::vector<double> x_coeffs = {});

/// Interface surface {x_j = zeta(x^_j)}; zeta is a polynomial of the single
/// tangential coordinate (d = 2) or a constant (d = 1).
class Interface {
 public:
  enum class Kind { Zero, Affine, Poly };

  Interface() = default;
  Interface(int d, int axis, Kind kind, std::vector<double> coeffs);
  static Interface zero(int d, int axis = 0) { return Interface(d, axis, Kind::Zero, {}); }

  int dim() const { return d_; }
  int axis() const { return axis_; }
  Kind kind() const { return kind_; }
  const std::vector<double>& coeffs() const { return coeffs_; }

  /// Tangential coordinate of x (0 in one dimension).
  double tangential(const Point& x) const { return d_ == 2 ? x[1 - axis_] : 0.0; }
  double zeta_at(double s) const;
  double zeta_derivative_at(double s) const;
  double zeta(const Point& x) const { return zeta_at(tangential(x)); }
  double zeta_derivative(const Point& x) const { return zeta_derivative_at(tangential(x)); }
  /// Signed normal offset x_j - zeta(x^_j); this is the flattened coordinate.
  double offset(const Point& x) const { return x[axis_] - zeta(x); }
  /// The interface point with tangential coordinate s.
  Point point_on(double s) const;
  bool is_flat() const;

 private:
  int d_ = 1;
  int axis_ = 0;
  Kind kind_ = Kind::Zero;
  std::vector<double> coeffs_;
};

struct BoundaryZeroReport {
  bool pass = true;
  double max_abs = 0.0;
  Point witness_x{};
  double witness_lambda = 0.0;
  int samples = 0;
};

struct NondegeneracyReport {
  bool pass = true;
  double threshold = 0.0;
  /// Per lambda-subinterval, the smallest (over x and directions) of the
  /// largest |xi . d_lambda f| seen on that subinterval.
  std::vector<double> subinterval_min_max;
  double worst = 0.0;
  Point witness_x{};
  Point witness_direction{};
  double witness_lo = 0.0;
  double witness_hi = 0.0;
};

/// The flux f(x, lambda) = f_L(x, lambda) H(-(x_j - zeta)) + f_R(x, lambda) H(x_j - zeta)
/// on the state interval [a, b].
class PiecewiseFlux {
 public:
  PiecewiseFlux(int d, std::vector<FluxComponent> left, std::vector<FluxComponent> right,
                Interface iface, double a, double b, Box domain = {});

  int dim() const { return d_; }
  double lower() const { return a_; }
  double upper() const { return b_; }
  const Interface& interface() const { return iface_; }
  const Box& domain() const { return domain_; }
  void set_domain(const Box& box) { domain_ = box; }
  const FluxComponent& component(Side side, int k) const {
    return side == Side::Left ? left_[k] : right_[k];
  }
  const std::vector<FluxComponent>& components(Side side) const {
    return side == Side::Left ? left_ : right_;
  }
  /// True when the two sides differ somewhere on a sample of domain x [a, b].
  bool has_jump() const { return has_jump_; }

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  /// Discontinuous flux; the mean of both sides exactly on the interface.
  /// Throws DomainError when lambda is outside [a, b].
  FluxVector eval(const Point& x, double lambda) const;
  /// Heaviside replaced by omega(-offset/eps), omega(offset/eps). Throws DomainError for eps <= 0.
  FluxVector eval_smoothed(const Point& x, double lambda, double eps) const;

  // Unchecked evaluations used by the solver and the residual quadratures.
  FluxVector side_value(Side side, const Point& x, double lambda) const;
  FluxVector side_d_lambda(Side side, const Point& x, double lambda) const;
  double side_divergence(Side side, const Point& x, double lambda) const;
  FluxVector value(const Point& x, double lambda) const;
  /// Smooth part of div_x f(x, lambda), i.e. without the interface delta.
  double smooth_divergence(const Point& x, double lambda) const;
  /// Normal flux jump F_R^j - F_L^j = (f_R - f_L) . (e_j - grad zeta) at x.
  double normal_jump(const Point& x, double lambda) const;
  /// (omega(-offset/eps), omega(offset/eps)).
  std::pair<double, double> smoothing_weights(const Point& x, double eps) const;

 private:
  int d_;
  std::vector<FluxComponent> left_;
  std::vector<FluxComponent> right_;
  Interface iface_;
  double a_;
  double b_;
  Box domain_;
  bool has_jump_ = true;
  std::string name_;

  void check_lambda(double lambda) const;
};

/// A flux of bounded variation in x, given componentwise, with optional known
/// discontinuity surfaces that the mollifier quadrature splits at.
struct GeneralBVFlux {
  int d = 1;
  double a = 0.0;
  double b = 1.0;
  Box domain{};
  std::vector<ScalarField> components;
  std::vector<ScalarField> lambda_derivatives;  // empty: central differences
  std::vector<Interface> jump_surfaces;
  std::function<double(double)> radius_policy = [](double eps) { return eps; };

  double component(int k, const Point& x, double lambda) const { return components[k](x, lambda); }
  double d_lambda(int k, const Point& x, double lambda) const;

  /// f_L H(-offset) + f_R H(offset) as a general flux with the interface as jump surface.
  static GeneralBVFlux from_piecewise(const PiecewiseFlux& model);
};

/// Smooth flux seen by the viscous solver.
class FluxField {
 public:
  virtual ~FluxField() = default;
  virtual int dim() const = 0;
  virtual double lower() const = 0;
  virtual double upper() const = 0;
  virtual double value(int k, const Point& x, double lambda) const = 0;
  virtual double d_lambda(int k, const Point& x, double lambda) const = 0;

  /// Values at both face states plus the local Rusanov speed
  /// max(|f'(uL)|, |f'(uR)|, |f'(mid)|, |secant|).
  virtual void face_data(int k, const Point& x, double ul, double ur, double& fl, double& fr,
                         double& alpha) const;
};

/// PiecewiseFlux with the Heaviside pair replaced by the smoothstep pair of width eps.
class SmoothedFlux final : public FluxField {
 public:
  SmoothedFlux(PiecewiseFlux model, double eps);
  int dim() const override { return model_.dim(); }
  double lower() const override { return model_.lower(); }
  double upper() const override { return model_.upper(); }
  double value(int k, const Point& x, double lambda) const override;
  double d_lambda(int k, const Point& x, double lambda) const override;
  void face_data(int k, const Point& x, double ul, double ur, double& fl, double& fr,
                 double& alpha) const override;
  const PiecewiseFlux& model() const { return model_; }
  double eps() const { return eps_; }

 private:
  PiecewiseFlux model_;
  double eps_;
};

/// x-convolution of a GeneralBVFlux with the normalized bump (1 - |s|^2)^2 of a given radius.
class MollifiedFlux final : public FluxField {
 public:
  MollifiedFlux(GeneralBVFlux flux, double radius);
  int dim() const override { return flux_.d; }
  double lower() const override { return flux_.a; }
  double upper() const override { return flux_.b; }
  double value(int k, const Point& x, double lambda) const override;
  double d_lambda(int k, const Point& x, double lambda) const override;
  double radius() const { return radius_; }
  const GeneralBVFlux& source() const { return flux_; }

 private:
  GeneralBVFlux flux_;
  double radius_;

  template <class F>
  double convolve(const Point& x, F&& integrand) const;
};

/// Mollify with radius flux.radius_policy(eps). Throws DomainError for eps <= 0.
MollifiedFlux mollify_flux(const GeneralBVFlux& flux, double eps);

BoundaryZeroReport check_boundary_zero(const PiecewiseFlux& model, int sample_count);
NondegeneracyReport check_nondegeneracy(const PiecewiseFlux& model, int directions, int subintervals,
                                        double threshold);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace dflux
