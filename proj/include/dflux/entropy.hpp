#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dflux/geometry.hpp"
#include "dflux/solver.hpp"

namespace dflux {

/// Space-time support of a test function: [t_lo, t_hi] x box.
struct Support {
  double t_lo = 0.0;
  double t_hi = 0.0;
  Box box{};
};

/// Nonnegative compactly supported C^1 test function phi(t, x).
class TestFunction {
 public:
  virtual ~TestFunction() = default;
  virtual double value(double t, const Point& x) const = 0;
  virtual double dt(double t, const Point& x) const = 0;
  virtual Point grad(double t, const Point& x) const = 0;
  virtual Support support() const = 0;
  /// max(sup phi, sup |phi_t|, sup |grad phi|).
  virtual double c1_norm() const = 0;

  const std::string& id() const { return id_; }
  void set_id(std::string s) { id_ = std::move(s); }

 private:
  std::string id_;
};

using TestFunctionPtr = std::shared_ptr<const TestFunction>;

/// beta((t - t0)/rt) prod_k beta((x_k - x0_k)/rx) with beta(s) = (1 - s^2)^3 on |s| < 1.
class Bump final : public TestFunction {
 public:
  Bump(int d, double t0, const Point& x0, double rt, double rx);
  double value(double t, const Point& x) const override;
  double dt(double t, const Point& x) const override;
  Point grad(double t, const Point& x) const override;
  Support support() const override;
  double c1_norm() const override;

  int dim() const { return d_; }
  double t0() const { return t0_; }
  const Point& x0() const { return x0_; }
  double rt() const { return rt_; }
  double rx() const { return rx_; }

 private:
  int d_;
  double t0_;
  Point x0_;
  double rt_, rx_;
};

/// phi(t, unflatten(x~)): a test function of the original coordinates seen in flattened ones.
class PulledBack final : public TestFunction {
 public:
  PulledBack(TestFunctionPtr phi, Interface iface);
  double value(double t, const Point& xt) const override;
  double dt(double t, const Point& xt) const override;
  Point grad(double t, const Point& xt) const override;
  Support support() const override;
  double c1_norm() const override;

 private:
  TestFunctionPtr phi_;
  Interface iface_;
  double norm_;
};

/// sum_i c_i phi_i with c_i >= 0.
class Combination final : public TestFunction {
 public:
  Combination(std::vector<double> coeffs, std::vector<TestFunctionPtr> terms);
  double value(double t, const Point& x) const override;
  double dt(double t, const Point& x) const override;
  Point grad(double t, const Point& x) const override;
  Support support() const override;
  double c1_norm() const override;

 private:
  std::vector<double> c_;
  std::vector<TestFunctionPtr> terms_;
};

/// Trace p_u on interface points x_Gamma(s), one row per frame.
struct TraceField {
  std::vector<double> times;
  std::vector<double> s;
  /// Quadrature weight of each s (1 in one dimension).
  std::vector<double> ds;
  std::vector<std::vector<double>> p;
  std::string stencil;

  void write_csv(const std::string& path) const;
};

/// One-sided linear extrapolations from the 2nd and 3rd cells on each side of the
/// interface along its normal axis, averaged and clamped to [a, b]. Throws
/// DomainError when fewer than 4 cell centers lie within 4 eps of the interface.
TraceField interface_trace(const Trajectory& frames, const Interface& iface, double a, double b, double eps);

/// The parts of an entropy residual, in the order they are summed.
struct ResidualTerms {
  double time = 0.0;       // |u - lambda| phi_t
  double flux = 0.0;       // sgn(u - lambda)(f(x,u) - f(x,lambda)) . grad phi
  double source = 0.0;     // -sgn(u - lambda) smooth div_x f(x,lambda) phi
  double initial = 0.0;    // |u0 - lambda| phi(0)
  double interface = 0.0;  // -sgn(p_u - lambda) (F_R - F_L)(x_Gamma, lambda) phi
  double total() const { return time + flux + source + initial + interface; }
};

/// E(lambda, phi) in the coordinates of `model`; frame 0 is the initial datum.
/// Midpoint rule over cells, trapezoid over frames. A model with a jump needs a trace.
ResidualTerms kruzhkov_terms(const Trajectory& frames, const PiecewiseFlux& model, double lambda,
                             const TestFunction& phi, const TraceField* trace = nullptr);
double kruzhkov_residual(const Trajectory& frames, const PiecewiseFlux& model, double lambda,
                         const TestFunction& phi, const TraceField* trace = nullptr);

/// The same pairing for a trajectory in flattened coordinates: normal fluxes F_L, F_R,
/// tangential f^k composed with unflatten, and the interface term on {x~_j = 0}.
ResidualTerms transformed_terms(const Trajectory& flat_frames, const PiecewiseFlux& model, double lambda,
                                const TestFunction& phi, const TraceField* trace = nullptr);
double transformed_entropy_residual(const Trajectory& flat_frames, const PiecewiseFlux& model, double lambda,
                                    const TestFunction& phi, const TraceField* trace = nullptr);

/// The Kato pairing of two trajectories on one grid with matching frame times.
double kato_residual(const Trajectory& u1, const Trajectory& u2, const PiecewiseFlux& model,
                     const TestFunction& phi);

/// sum |u1 - u2| * cell volume. Throws DomainError on a grid mismatch.
double l1_distance(const Field& u1, const Field& u2);

/// tol_factor * ||phi||_C1 * T * |box|.
double residual_tolerance(const TestFunction& phi, double T, const Box& box, double tol_factor);

/// {a + k(b - a)/10 : k = 1..9} followed by a and b.
std::vector<double> lambda_battery(double a, double b);

/// Quasi-random bumps inside [0, T] x box with rt in [0.3 T, 0.5 T] and t0 + rt <= T.
std::vector<TestFunctionPtr> bump_battery(double T, const Box& box, int count = 20);

struct EntropyEntry {
  double lambda = 0.0;
  std::string phi_id;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = true;
};

struct EntropyReport {
  std::vector<EntropyEntry> entries;
  bool pass = true;
  double min_residual = 0.0;
  /// min over entries of residual / (tol / tol_factor).
  double min_scaled = 0.0;
  std::size_t worst = 0;

  nlohmann::json to_json() const;
};

enum class ResidualKind { Kruzhkov, Transformed };

/// Runs every (lambda, phi) pair; entries pass iff residual >= -tol.
EntropyReport entropy_battery(const Trajectory& frames, const PiecewiseFlux& model,
                              const std::vector<double>& lambdas, const std::vector<TestFunctionPtr>& phis,
                              const Box& box, double tol_factor, const TraceField* trace = nullptr,
                              ResidualKind kind = ResidualKind::Kruzhkov);

/// Kato battery over phis for one trajectory pair.
EntropyReport kato_battery(const Trajectory& u1, const Trajectory& u2, const PiecewiseFlux& model,
                           const std::vector<TestFunctionPtr>& phis, const Box& box, double tol_factor);

struct ContractionEntry {
  std::size_t pair = 0;
  double t = 0.0;
  double initial = 0.0;
  double current = 0.0;
  double ratio = 0.0;
};

struct ContractionReport {
  bool pass = true;
  double eta = 0.05;
  double worst_ratio = 0.0;
  std::vector<ContractionEntry> entries;
  /// Worst ratio per pair.
  std::vector<double> pair_worst;
};

/// l1(u1(t), u2(t)) <= l1(u1(0), u2(0)) (1 + eta) at every recorded time; 0/0 passes.
ContractionReport contraction_check(const std::vector<std::pair<const Trajectory*, const Trajectory*>>& pairs,
                                    double eta = 0.05);

/// l1 restricted to cells whose centers lie in the cone section at time f.t.
double section_l1(const Field& u1, const Field& u2, const Cone& cone);

struct ConeLocalityReport {
  bool pass = true;
  bool data_coincide_on_base = true;
  double kappa = 0.0;
  double tol = 1e-2;
  std::vector<double> times;
  std::vector<double> section_distance;
};

/// sup over frames inside the cone's lifetime of section_l1 <= tol.
ConeLocalityReport cone_locality_check(const Trajectory& u1, const Trajectory& u2, const Cone& cone,
                                       double tol = 1e-2);

struct GronwallReport {
  bool pass = true;
  double C = 0.0;
  double initial = 0.0;
  /// max over frames of growth(t) / exp(2 d C t).
  double worst = 0.0;
  std::vector<double> times;
  std::vector<double> growth;
};

/// section_l1(t) / section_l1(0) <= exp(2 d C t) at every frame inside the cone's lifetime.
/// L1 values below 1e-12 are treated as zero.
GronwallReport gronwall_check(const Trajectory& u1, const Trajectory& u2, const Cone& cone, double C);

}  // namespace dflux
