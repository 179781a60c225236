#include "dflux/flux.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dflux {

double smoothstep(double z) {
  if (z <= -1.0) return 0.0;
  if (z >= 1.0) return 1.0;
  const double s = 0.5 * (z + 1.0);
  return s * s * (3.0 - 2.0 * s);
}

double smoothstep_derivative(double z) {
  if (z <= -1.0 || z >= 1.0) return 0.0;
  const double s = 0.5 * (z + 1.0);
  return 3.0 * s * (1.0 - s);
}

namespace {

double lambda_step(double lambda) { return 1e-5 * std::max(1.0, std::abs(lambda)); }
double x_step(double xk) { return 1e-6 * std::max(1.0, std::abs(xk)); }

double poly_eval(const std::vector<double>& c, double v) {
  double r = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * v + *it;
  return r;
}

double poly_derivative(const std::vector<double>& c, double v) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) r = r * v + static_cast<double>(i) * c[i];
  return r;
}

}  // namespace

double FluxComponent::d_lambda(const Point& x, double lambda) const {
  if (lambda_derivative) return lambda_derivative(x, lambda);
  const double h = lambda_step(lambda);
  return (value(x, lambda + h) - value(x, lambda - h)) / (2.0 * h);
}

double FluxComponent::d_x(const Point& x, double lambda, int k) const {
  if (x_derivative) return x_derivative(x, lambda, k);
  const double h = x_step(x[k]);
  Point xp = x, xm = x;
  xp[k] += h;
  xm[k] -= h;
  return (value(xp, lambda) - value(xm, lambda)) / (2.0 * h);
}

double FluxComponent::d_x_lambda(const Point& x, double lambda, int k) const {
  if (x_derivative_of_lambda_derivative) return x_derivative_of_lambda_derivative(x, lambda, k);
  const double h = x_step(x[k]);
  Point xp = x, xm = x;
  xp[k] += h;
  xm[k] -= h;
  return (d_lambda(xp, lambda) - d_lambda(xm, lambda)) / (2.0 * h);
}

FluxComponent polynomial_component(int axis, std::vector<double> poly_lambda, XModulation modulation,
                                   std::vector<double> x_coeffs) {
  FluxComponent c;
  c.axis = axis;
  if (modulation == XModulation::None) {
    c.value = [p = poly_lambda](const Point&, double l) { return poly_eval(p, l); };
    c.lambda_derivative = [p = poly_lambda](const Point&, double l) { return poly_derivative(p, l); };
    c.x_derivative = [](const Point&, double, int) { return 0.0; };
    c.x_derivative_of_lambda_derivative = [](const Point&, double, int) { return 0.0; };
    return c;
  }
  if (x_coeffs.empty()) x_coeffs = {1.0};
  x_coeffs.resize(kMaxDim + 1, 0.0);
  auto m = [xc = x_coeffs](const Point& x) {
    double v = xc[0];
    for (int k = 0; k < kMaxDim; ++k) v += xc[k + 1] * x[k];
    return v;
  };
  c.value = [p = poly_lambda, m](const Point& x, double l) { return m(x) * poly_eval(p, l); };
  c.lambda_derivative = [p = poly_lambda, m](const Point& x, double l) {
    return m(x) * poly_derivative(p, l);
  };
  c.x_derivative = [p = poly_lambda, xc = x_coeffs](const Point&, double l, int k) {
    return xc[k + 1] * poly_eval(p, l);
  };
  c.x_derivative_of_lambda_derivative = [p = poly_lambda, xc = x_coeffs](const Point&, double l, int k) {
    return xc[k + 1] * poly_derivative(p, l);
  };
  return c;
}

// ---------------------------------------------------------------------------
// Interface

Interface::Interface(int d, int axis, Kind kind, std::vector<double> coeffs)
    : d_(d), axis_(axis), kind_(kind), coeffs_(std::move(coeffs)) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("interface dimension must be 1 or 2");
  if (axis < 0 || axis >= d) throw std::invalid_argument("interface axis out of range");
  if (kind == Kind::Zero) coeffs_.clear();
  if (kind == Kind::Affine && coeffs_.size() > 2)
    throw std::invalid_argument("affine interface takes at most two coefficients");
}

double Interface::zeta_at(double s) const {
  if (coeffs_.empty()) return 0.0;
  if (d_ == 1) return coeffs_[0];
  return poly_eval(coeffs_, s);
}

double Interface::zeta_derivative_at(double s) const {
  if (d_ == 1 || coeffs_.size() < 2) return 0.0;
  return poly_derivative(coeffs_, s);
}

Point Interface::point_on(double s) const {
  Point p{0.0, 0.0};
  p[axis_] = zeta_at(s);
  if (d_ == 2) p[1 - axis_] = s;
  return p;
}

bool Interface::is_flat() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
}

// ---------------------------------------------------------------------------
// PiecewiseFlux

PiecewiseFlux::PiecewiseFlux(int d, std::vector<FluxComponent> left, std::vector<FluxComponent> right,
                             Interface iface, double a, double b, Box domain)
    : d_(d),
      left_(std::move(left)),
      right_(std::move(right)),
      iface_(std::move(iface)),
      a_(a),
      b_(b),
      domain_(domain) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("flux dimension must be 1 or 2");
  if (!(a < b)) throw std::invalid_argument("flux state bounds require a < b");
  if (static_cast<int>(left_.size()) != d || static_cast<int>(right_.size()) != d)
    throw std::invalid_argument("flux needs exactly d components per side");
  if (iface_.dim() != d) throw std::invalid_argument("interface dimension differs from flux dimension");
  domain_.d = d;

  has_jump_ = false;
  for (unsigned i = 1; i <= 32 && !has_jump_; ++i) {
    Point x{0.0, 0.0};
    for (int k = 0; k < d; ++k)
      x[k] = domain_.lo[k] + (domain_.hi[k] - domain_.lo[k]) * halton(i, k == 0 ? 2 : 3);
    for (int q = 0; q <= 8 && !has_jump_; ++q) {
      const double l = a + (b - a) * q / 8.0;
      for (int k = 0; k < d; ++k)
        if (std::abs(left_[k](x, l) - right_[k](x, l)) > 1e-14) has_jump_ = true;
    }
  }
}

void PiecewiseFlux::check_lambda(double lambda) const {
  if (!(lambda >= a_ && lambda <= b_)) {
    std::ostringstream os;
    os << "state " << lambda << " outside [" << a_ << ", " << b_ << "]";
    throw DomainError(os.str());
  }
}

FluxVector PiecewiseFlux::side_value(Side side, const Point& x, double lambda) const {
  FluxVector f{0.0, 0.0};
  const auto& comps = components(side);
  for (int k = 0; k < d_; ++k) f[k] = comps[k](x, lambda);
  return f;
}

FluxVector PiecewiseFlux::side_d_lambda(Side side, const Point& x, double lambda) const {
  FluxVector f{0.0, 0.0};
  const auto& comps = components(side);
  for (int k = 0; k < d_; ++k) f[k] = comps[k].d_lambda(x, lambda);
  return f;
}

double PiecewiseFlux::side_divergence(Side side, const Point& x, double lambda) const {
  const auto& comps = components(side);
  double s = 0.0;
  for (int k = 0; k < d_; ++k) s += comps[k].d_x(x, lambda, k);
  return s;
}

FluxVector PiecewiseFlux::value(const Point& x, double lambda) const {
  const double off = iface_.offset(x);
  if (off < 0.0) return side_value(Side::Left, x, lambda);
  if (off > 0.0) return side_value(Side::Right, x, lambda);
  const auto l = side_value(Side::Left, x, lambda);
  const auto r = side_value(Side::Right, x, lambda);
  return {0.5 * (l[0] + r[0]), 0.5 * (l[1] + r[1])};
}

FluxVector PiecewiseFlux::eval(const Point& x, double lambda) const {
  check_lambda(lambda);
  return value(x, lambda);
}

std::pair<double, double> PiecewiseFlux::smoothing_weights(const Point& x, double eps) const {
  const double z = iface_.offset(x) / eps;
  return {smoothstep(-z), smoothstep(z)};
}

FluxVector PiecewiseFlux::eval_smoothed(const Point& x, double lambda, double eps) const {
  if (!(eps > 0.0)) throw DomainError("smoothing width must be positive");
  check_lambda(lambda);
  const auto [wl, wr] = smoothing_weights(x, eps);
  FluxVector f{0.0, 0.0};
  for (int k = 0; k < d_; ++k) {
    if (wl > 0.0) f[k] += wl * left_[k](x, lambda);
    if (wr > 0.0) f[k] += wr * right_[k](x, lambda);
  }
  return f;
}

double PiecewiseFlux::smooth_divergence(const Point& x, double lambda) const {
  const double off = iface_.offset(x);
  if (off < 0.0) return side_divergence(Side::Left, x, lambda);
  if (off > 0.0) return side_divergence(Side::Right, x, lambda);
  return 0.5 * (side_divergence(Side::Left, x, lambda) + side_divergence(Side::Right, x, lambda));
}

double PiecewiseFlux::normal_jump(const Point& x, double lambda) const {
  const auto l = side_value(Side::Left, x, lambda);
  const auto r = side_value(Side::Right, x, lambda);
  const int j = iface_.axis();
  double jump = r[j] - l[j];
  if (d_ == 2) {
    const int t = 1 - j;
    jump -= iface_.zeta_derivative(x) * (r[t] - l[t]);
  }
  return jump;
}

// ---------------------------------------------------------------------------
// GeneralBVFlux

double GeneralBVFlux::d_lambda(int k, const Point& x, double lambda) const {
  if (static_cast<int>(lambda_derivatives.size()) > k && lambda_derivatives[k])
    return lambda_derivatives[k](x, lambda);
  const double h = lambda_step(lambda);
  return (components[k](x, lambda + h) - components[k](x, lambda - h)) / (2.0 * h);
}

GeneralBVFlux GeneralBVFlux::from_piecewise(const PiecewiseFlux& model) {
  GeneralBVFlux g;
  g.d = model.dim();
  g.a = model.lower();
  g.b = model.upper();
  g.domain = model.domain();
  g.jump_surfaces = {model.interface()};
  for (int k = 0; k < g.d; ++k) {
    g.components.push_back([model, k](const Point& x, double l) { return model.value(x, l)[k]; });
    g.lambda_derivatives.push_back([model, k](const Point& x, double l) {
      const double off = model.interface().offset(x);
      if (off < 0.0) return model.component(Side::Left, k).d_lambda(x, l);
      if (off > 0.0) return model.component(Side::Right, k).d_lambda(x, l);
      return 0.5 * (model.component(Side::Left, k).d_lambda(x, l) +
                    model.component(Side::Right, k).d_lambda(x, l));
    });
  }
  return g;
}

// ---------------------------------------------------------------------------
// FluxField implementations

namespace {

// Nearly equal states make the secant pure cancellation error; the derivative
// samples already cover it there.
bool secant_resolved(double ul, double ur) { return std::abs(ur - ul) > 1e-8 * (1.0 + std::abs(ul) + std::abs(ur)); }

}  // namespace

void FluxField::face_data(int k, const Point& x, double ul, double ur, double& fl, double& fr,
                          double& alpha) const {
  fl = value(k, x, ul);
  fr = value(k, x, ur);
  alpha = std::max(std::abs(d_lambda(k, x, ul)), std::abs(d_lambda(k, x, ur)));
  alpha = std::max(alpha, std::abs(d_lambda(k, x, 0.5 * (ul + ur))));
  if (secant_resolved(ul, ur)) alpha = std::max(alpha, std::abs((fr - fl) / (ur - ul)));
}

SmoothedFlux::SmoothedFlux(PiecewiseFlux model, double eps) : model_(std::move(model)), eps_(eps) {
  if (!(eps > 0.0)) throw DomainError("smoothing width must be positive");
}

double SmoothedFlux::value(int k, const Point& x, double lambda) const {
  const auto [wl, wr] = model_.smoothing_weights(x, eps_);
  double f = 0.0;
  if (wl > 0.0) f += wl * model_.component(Side::Left, k)(x, lambda);
  if (wr > 0.0) f += wr * model_.component(Side::Right, k)(x, lambda);
  return f;
}

double SmoothedFlux::d_lambda(int k, const Point& x, double lambda) const {
  const auto [wl, wr] = model_.smoothing_weights(x, eps_);
  double f = 0.0;
  if (wl > 0.0) f += wl * model_.component(Side::Left, k).d_lambda(x, lambda);
  if (wr > 0.0) f += wr * model_.component(Side::Right, k).d_lambda(x, lambda);
  return f;
}

void SmoothedFlux::face_data(int k, const Point& x, double ul, double ur, double& fl, double& fr,
                             double& alpha) const {
  const auto [wl, wr] = model_.smoothing_weights(x, eps_);
  const auto& cl = model_.component(Side::Left, k);
  const auto& cr = model_.component(Side::Right, k);
  const double um = 0.5 * (ul + ur);
  fl = fr = 0.0;
  double dl = 0.0, dr = 0.0, dm = 0.0;
  if (wl > 0.0) {
    fl += wl * cl(x, ul);
    fr += wl * cl(x, ur);
    dl += wl * cl.d_lambda(x, ul);
    dr += wl * cl.d_lambda(x, ur);
    dm += wl * cl.d_lambda(x, um);
  }
  if (wr > 0.0) {
    fl += wr * cr(x, ul);
    fr += wr * cr(x, ur);
    dl += wr * cr.d_lambda(x, ul);
    dr += wr * cr.d_lambda(x, ur);
    dm += wr * cr.d_lambda(x, um);
  }
  alpha = std::max({std::abs(dl), std::abs(dr), std::abs(dm)});
  if (secant_resolved(ul, ur)) alpha = std::max(alpha, std::abs((fr - fl) / (ur - ul)));
}

MollifiedFlux::MollifiedFlux(GeneralBVFlux flux, double radius) : flux_(std::move(flux)), radius_(radius) {
  if (!(radius > 0.0)) throw DomainError("mollification radius must be positive");
}

namespace {

struct GaussRule {
  std::vector<double> nodes, weights;
  explicit GaussRule(int n) { gauss_legendre(n, nodes, weights); }
};

const GaussRule& inner_rule() {
  static const GaussRule rule(8);
  return rule;
}

const GaussRule& outer_rule() {
  static const GaussRule rule(24);
  return rule;
}

}  // namespace

template <class F>
double MollifiedFlux::convolve(const Point& x, F&& integrand) const {
  const auto& in = inner_rule();
  const int j = flux_.jump_surfaces.empty() ? 0 : flux_.jump_surfaces.front().axis();
  // Integrates K(s) g(x - r s) over the chord s_j in [-h, h] at fixed tangential offset st,
  // split at every crossing of a jump surface with the same axis.
  auto chord = [&](double st, double h, double& num, double& den) {
    const double yt = x[1 - j] - radius_ * st;
    std::vector<double> cuts{-h, h};
    for (const auto& surf : flux_.jump_surfaces) {
      if (surf.axis() != j) continue;
      const double zeta = flux_.d == 2 ? surf.zeta_at(yt) : surf.zeta_at(0.0);
      const double sc = (x[j] - zeta) / radius_;
      if (sc > -h && sc < h) cuts.push_back(sc);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const double lo = cuts[p], hi = cuts[p + 1];
      const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
      if (half <= 0.0) continue;
      for (std::size_t q = 0; q < in.nodes.size(); ++q) {
        const double sj = mid + half * in.nodes[q];
        const double r2 = sj * sj + st * st;
        const double kern = (1.0 - r2) * (1.0 - r2);
        const double w = half * in.weights[q] * kern;
        Point y = x;
        y[j] = x[j] - radius_ * sj;
        if (flux_.d == 2) y[1 - j] = yt;
        num += w * integrand(y);
        den += w;
      }
    }
  };
  double num = 0.0, den = 0.0;
  if (flux_.d == 1) {
    chord(0.0, 1.0, num, den);
  } else {
    const auto& out = outer_rule();
    for (std::size_t q = 0; q < out.nodes.size(); ++q) {
      const double st = out.nodes[q];
      double n = 0.0, dd = 0.0;
      chord(st, std::sqrt(std::max(0.0, 1.0 - st * st)), n, dd);
      num += out.weights[q] * n;
      den += out.weights[q] * dd;
    }
  }
  return num / den;
}

double MollifiedFlux::value(int k, const Point& x, double lambda) const {
  return convolve(x, [&](const Point& y) { return flux_.component(k, y, lambda); });
}

double MollifiedFlux::d_lambda(int k, const Point& x, double lambda) const {
  return convolve(x, [&](const Point& y) { return flux_.d_lambda(k, y, lambda); });
}

MollifiedFlux mollify_flux(const GeneralBVFlux& flux, double eps) {
  if (!(eps > 0.0)) throw DomainError("mollification width must be positive");
  return MollifiedFlux(flux, flux.radius_policy(eps));
}

// ---------------------------------------------------------------------------
// Structural checks

namespace {

Point domain_sample(const Box& box, int d, unsigned i) {
  Point x{0.0, 0.0};
  for (int k = 0; k < d; ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * halton(i, k == 0 ? 2 : 3);
  return x;
}

}  // namespace

BoundaryZeroReport check_boundary_zero(const PiecewiseFlux& model, int sample_count) {
  if (sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
  BoundaryZeroReport rep;
  const int d = model.dim();
  for (int i = 1; i <= sample_count; ++i) {
    const Point x = domain_sample(model.domain(), d, static_cast<unsigned>(i));
    for (double l : {model.lower(), model.upper()}) {
      for (Side side : {Side::Left, Side::Right}) {
        const auto f = model.side_value(side, x, l);
        for (int k = 0; k < d; ++k) {
          if (std::abs(f[k]) > rep.max_abs) {
            rep.max_abs = std::abs(f[k]);
            rep.witness_x = x;
            rep.witness_lambda = l;
          }
        }
      }
    }
    ++rep.samples;
  }
  rep.pass = rep.max_abs <= 1e-12;
  return rep;
}

NondegeneracyReport check_nondegeneracy(const PiecewiseFlux& model, int directions, int subintervals,
                                        double threshold) {
  if (directions < 1 || subintervals < 1 || !(threshold > 0.0))
    throw std::invalid_argument("nondegeneracy check needs directions, subintervals >= 1 and threshold > 0");
  constexpr int kXSamples = 16;
  constexpr int kLambdaPerSub = 17;
  const int d = model.dim();
  const double a = model.lower(), b = model.upper();

  std::vector<Point> dirs;
  if (d == 1) {
    dirs.push_back({1.0, 0.0});
  } else {
    for (int i = 0; i < directions; ++i) {
      const double th = std::numbers::pi * i / directions;
      dirs.push_back({std::cos(th), std::sin(th)});
    }
  }

  NondegeneracyReport rep;
  rep.threshold = threshold;
  rep.subinterval_min_max.assign(subintervals, std::numeric_limits<double>::infinity());
  rep.worst = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= kXSamples; ++i) {
    const Point x = domain_sample(model.domain(), d, static_cast<unsigned>(i));
    const double off = model.interface().offset(x);
    const Side side = off < 0.0 ? Side::Left : Side::Right;
    for (int s = 0; s < subintervals; ++s) {
      const double lo = a + (b - a) * s / subintervals;
      const double hi = a + (b - a) * (s + 1) / subintervals;
      std::vector<FluxVector> der(kLambdaPerSub);
      for (int q = 0; q < kLambdaPerSub; ++q)
        der[q] = model.side_d_lambda(side, x, lo + (hi - lo) * q / (kLambdaPerSub - 1));
      for (const auto& xi : dirs) {
        double mx = 0.0;
        for (const auto& g : der) {
          double dot = 0.0;
          for (int k = 0; k < d; ++k) dot += xi[k] * g[k];
          mx = std::max(mx, std::abs(dot));
        }
        rep.subinterval_min_max[s] = std::min(rep.subinterval_min_max[s], mx);
        if (mx < rep.worst) {
          rep.worst = mx;
          rep.witness_x = x;
          rep.witness_direction = xi;
          rep.witness_lo = lo;
          rep.witness_hi = hi;
        }
      }
    }
  }
  rep.pass = rep.worst >= threshold;
  return rep;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 0 ? 1.0 : (n == 1 ? z : p1);
      const double pnm1 = n == 1 ? 1.0 : p0;
      dp = n * (z * pn - pnm1) / (z * z - 1.0);
      const double dz = pn / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = z;
    weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  // Sort ascending so rules are symmetric by index.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int p, int q) { return nodes[p] < nodes[q]; });
  std::vector<double> nn(n), ww(n);
  for (int i = 0; i < n; ++i) {
    nn[i] = nodes[idx[i]];
    ww[i] = weights[idx[i]];
  }
  nodes = std::move(nn);
  weights = std::move(ww);
}

}  // namespace dflux
