#include "dflux/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dflux {

Point flatten(const Interface& iface, const Point& x) {
  Point y = x;
  y[iface.axis()] = x[iface.axis()] - iface.zeta(x);
  return y;
}

Point unflatten(const Interface& iface, const Point& xt) {
  // zeta depends only on the tangential coordinate, which flattening leaves alone.
  Point x = xt;
  x[iface.axis()] = xt[iface.axis()] + iface.zeta(xt);
  return x;
}

namespace {

double zeta_second_derivative(const Interface& iface, double s) {
  const double h = 1e-5 * std::max(1.0, std::abs(s));
  return (iface.zeta_derivative_at(s + h) - iface.zeta_derivative_at(s - h)) / (2.0 * h);
}

// Value (or lambda-derivative when dl) of flattened component k.
double flat_value(const std::vector<FluxComponent>& comps, const Interface& iface, int d, int k,
                  const Point& xt, double l, bool dl) {
  const Point x = unflatten(iface, xt);
  auto f = [&](int m) { return dl ? comps[m].d_lambda(x, l) : comps[m](x, l); };
  const int j = iface.axis();
  if (d == 1 || k != j) return f(k);
  return f(j) - iface.zeta_derivative(xt) * f(1 - j);
}

// d/dx~_m of the flattened component k (or of its lambda-derivative when dl).
double flat_dx(const std::vector<FluxComponent>& comps, const Interface& iface, int d, int k,
               const Point& xt, double l, int m, bool dl) {
  const Point x = unflatten(iface, xt);
  const int j = iface.axis();
  auto f = [&](int c) { return dl ? comps[c].d_lambda(x, l) : comps[c](x, l); };
  auto fx = [&](int c, int axis) { return dl ? comps[c].d_x_lambda(x, l, axis) : comps[c].d_x(x, l, axis); };
  if (d == 1) return fx(k, m);
  const int t = 1 - j;
  const double zp = iface.zeta_derivative(xt);
  // d/dx~_j = d/dx_j; d/dx~_t = d/dx_t + zeta' d/dx_j.
  auto chain = [&](int c) { return m == j ? fx(c, j) : fx(c, t) + zp * fx(c, j); };
  if (k != j) return chain(k);
  if (m == j) return chain(j) - zp * chain(t);
  return chain(j) - zeta_second_derivative(iface, xt[t]) * f(t) - zp * chain(t);
}

FluxComponent flat_component(const std::vector<FluxComponent>& comps, const Interface& iface, int d,
                             int k) {
  FluxComponent c;
  c.axis = k;
  c.value = [=](const Point& xt, double l) { return flat_value(comps, iface, d, k, xt, l, false); };
  c.lambda_derivative = [=](const Point& xt, double l) {
    return flat_value(comps, iface, d, k, xt, l, true);
  };
  c.x_derivative = [=](const Point& xt, double l, int m) {
    return flat_dx(comps, iface, d, k, xt, l, m, false);
  };
  c.x_derivative_of_lambda_derivative = [=](const Point& xt, double l, int m) {
    return flat_dx(comps, iface, d, k, xt, l, m, true);
  };
  return c;
}

}  // namespace

FluxComponent transformed_normal_flux(const PiecewiseFlux& model, Side side) {
  return flat_component(model.components(side), model.interface(), model.dim(), model.interface().axis());
}

PiecewiseFlux flatten_model(const PiecewiseFlux& model) {
  const int d = model.dim();
  const Interface& iface = model.interface();
  std::vector<FluxComponent> left, right;
  for (int k = 0; k < d; ++k) {
    left.push_back(flat_component(model.components(Side::Left), iface, d, k));
    right.push_back(flat_component(model.components(Side::Right), iface, d, k));
  }
  // Bounding box of the flattened domain boundary.
  const Box& dom = model.domain();
  Box out = dom;
  const int j = iface.axis();
  out.lo[j] = std::numeric_limits<double>::infinity();
  out.hi[j] = -std::numeric_limits<double>::infinity();
  constexpr int kEdge = 257;
  for (int i = 0; i < kEdge; ++i) {
    Point x = dom.lo;
    if (d == 2) x[1 - j] = dom.lo[1 - j] + (dom.hi[1 - j] - dom.lo[1 - j]) * i / (kEdge - 1.0);
    for (double xj : {dom.lo[j], dom.hi[j]}) {
      x[j] = xj;
      const double v = flatten(iface, x)[j];
      out.lo[j] = std::min(out.lo[j], v);
      out.hi[j] = std::max(out.hi[j], v);
    }
  }
  PiecewiseFlux flat(d, std::move(left), std::move(right), Interface::zero(d, j), model.lower(),
                     model.upper(), out);
  flat.set_name(model.name());
  return flat;
}

Point radial_projection(const Point& x, const Point& center, double radius, int d) {
  const double rho = distance(x, center, d);
  if (rho <= radius) return x;
  Point p = x;
  for (int k = 0; k < d; ++k) p[k] = center[k] + radius * (x[k] - center[k]) / rho;
  return p;
}

ScalarField radial_extend(ScalarField field, const Point& center, double radius, int d) {
  if (!(radius > 0.0)) throw DomainError("radial extension radius must be positive");
  return [field = std::move(field), center, radius, d](const Point& x, double l) {
    return field(radial_projection(x, center, radius, d), l);
  };
}

namespace {

// Jacobian of the radial projection, row m, column k.
double projection_jacobian(const Point& x, const Point& center, double radius, int d, int m, int k) {
  const double rho = distance(x, center, d);
  if (rho <= radius) return m == k ? 1.0 : 0.0;
  const double vm = (x[m] - center[m]) / rho;
  const double vk = (x[k] - center[k]) / rho;
  return radius / rho * ((m == k ? 1.0 : 0.0) - vm * vk);
}

}  // namespace

FluxComponent radial_extend(const FluxComponent& component, const Point& center, double radius, int d) {
  if (!(radius > 0.0)) throw DomainError("radial extension radius must be positive");
  FluxComponent c;
  c.axis = component.axis;
  c.value = [component, center, radius, d](const Point& x, double l) {
    return component(radial_projection(x, center, radius, d), l);
  };
  c.lambda_derivative = [component, center, radius, d](const Point& x, double l) {
    return component.d_lambda(radial_projection(x, center, radius, d), l);
  };
  c.x_derivative = [component, center, radius, d](const Point& x, double l, int k) {
    const Point p = radial_projection(x, center, radius, d);
    double s = 0.0;
    for (int m = 0; m < d; ++m) s += component.d_x(p, l, m) * projection_jacobian(x, center, radius, d, m, k);
    return s;
  };
  c.x_derivative_of_lambda_derivative = [component, center, radius, d](const Point& x, double l, int k) {
    const Point p = radial_projection(x, center, radius, d);
    double s = 0.0;
    for (int m = 0; m < d; ++m)
      s += component.d_x_lambda(p, l, m) * projection_jacobian(x, center, radius, d, m, k);
    return s;
  };
  return c;
}

PiecewiseFlux radial_extend(const PiecewiseFlux& model, const Point& center, double radius) {
  const int d = model.dim();
  std::vector<FluxComponent> left, right;
  for (int k = 0; k < d; ++k) {
    left.push_back(radial_extend(model.component(Side::Left, k), center, radius, d));
    right.push_back(radial_extend(model.component(Side::Right, k), center, radius, d));
  }
  PiecewiseFlux out(d, std::move(left), std::move(right), model.interface(), model.lower(), model.upper(),
                    model.domain());
  out.set_name(model.name());
  return out;
}

namespace {

template <class G>
DerivativeBound derivative_max(const PiecewiseFlux& model, double radius, double state_bound,
                               const SampleGrid& grid, G&& gradient_sq) {
  if (!(radius > 0.0)) throw DomainError("bound radius must be positive");
  DerivativeBound out;
  out.grid = grid;
  out.radius = radius;
  out.lambda_lo = std::max(model.lower(), -state_bound);
  out.lambda_hi = std::min(model.upper(), state_bound);
  if (grid.x_samples < 1 || grid.lambda_samples < 1 || out.lambda_lo > out.lambda_hi)
    throw DomainError("empty sample for derivative bound");
  const int d = model.dim();
  std::vector<Point> xs;
  const int n = grid.x_samples;
  auto coord = [&](int axis, int i) {
    return n == 1 ? grid.center[axis] : grid.center[axis] + radius * (-1.0 + 2.0 * i / (n - 1.0));
  };
  if (d == 1) {
    for (int i = 0; i < n; ++i) xs.push_back({coord(0, i), 0.0});
  } else {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        Point x{coord(0, i), coord(1, k)};
        if (distance(x, grid.center, d) <= radius * (1.0 + 1e-12)) xs.push_back(x);
      }
  }
  const int nl = grid.lambda_samples;
  double best = -1.0;
  for (const auto& x : xs) {
    for (int q = 0; q < nl; ++q) {
      const double l =
          nl == 1 ? out.lambda_lo : out.lambda_lo + (out.lambda_hi - out.lambda_lo) * q / (nl - 1.0);
      const double v = gradient_sq(x, l);
      if (v > best) {
        best = v;
        out.witness_x = x;
        out.witness_lambda = l;
      }
      ++out.points;
    }
  }
  out.value = std::sqrt(std::max(best, 0.0));
  return out;
}

}  // namespace

DerivativeBound speed_bound(const PiecewiseFlux& model, double radius, double state_bound,
                            const SampleGrid& grid) {
  const int d = model.dim();
  const bool both = model.has_jump();
  return derivative_max(model, radius, state_bound, grid, [&](const Point& x, double l) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double gl = model.component(Side::Left, j).d_lambda(x, l);
      s += gl * gl;
      if (both) {
        const double gr = model.component(Side::Right, j).d_lambda(x, l);
        s += gr * gr;
      }
    }
    return s;
  });
}

DerivativeBound mixed_derivative_bound(const PiecewiseFlux& model, double radius, double state_bound,
                                       const SampleGrid& grid) {
  const int d = model.dim();
  const bool both = model.has_jump();
  return derivative_max(model, radius, state_bound, grid, [&](const Point& x, double l) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double gl = model.component(Side::Left, j).d_x_lambda(x, l, j);
      s += gl * gl;
      if (both) {
        const double gr = model.component(Side::Right, j).d_x_lambda(x, l, j);
        s += gr * gr;
      }
    }
    return s;
  });
}

bool cone_contains(const Cone& cone, double t, const Point& xt) {
  if (t < 0.0) throw DomainError("cone time must be nonnegative");
  return t < cone.height() && distance(xt, cone.center, cone.d) < cone.section_radius(t);
}

namespace {

double cone_argument(const Cone& c, double eps, double t, const Point& xt) {
  return (distance(xt, c.center, c.d) + c.N * t - c.R + eps) / eps;
}

}  // namespace

double cone_cutoff_chi_raw(const Cone& ci, const Cone& cj, double eps, double t, const Point& xt) {
  if (!(eps > 0.0)) throw DomainError("cutoff width must be positive");
  return 1.0 - smoothstep(cone_argument(ci, eps, t, xt)) * smoothstep(cone_argument(cj, eps, t, xt));
}

double cone_cutoff_chi(const Cone& ci, const Cone& cj, double eps, double t, const Point& xt) {
  const double raw = cone_cutoff_chi_raw(ci, cj, eps, t, xt);
  return raw * (1.0 - smoothstep(cone_argument(ci, eps, t, xt))) *
         (1.0 - smoothstep(cone_argument(cj, eps, t, xt)));
}

ChartReport validate_chart(const Chart& chart, int samples) {
  ChartReport rep;
  const int d = chart.iface.dim();
  if (!(chart.R > 0.0)) {
    rep.pass = false;
    rep.reason = "flattened radius must be positive";
    return rep;
  }
  if (!(chart.r > 0.0)) {
    rep.pass = false;
    rep.reason = "chart radius must be positive";
    return rep;
  }
  const Point ct = chart.flattened_center();
  auto probe = [&](const Point& y) {
    const double dist = distance(unflatten(chart.iface, y), chart.center, d);
    if (dist > rep.worst_distance) {
      rep.worst_distance = dist;
      rep.witness = y;
    }
  };
  if (d == 1) {
    for (int i = 0; i < samples; ++i) probe({ct[0] + chart.R * (-1.0 + 2.0 * i / std::max(1, samples - 1)), 0.0});
  } else {
    for (int i = 0; i < samples; ++i) {
      const double th = 2.0 * std::numbers::pi * i / samples;
      probe({ct[0] + chart.R * std::cos(th), ct[1] + chart.R * std::sin(th)});
      const double rr = chart.R * std::sqrt(halton(static_cast<unsigned>(i + 1), 2));
      const double ph = 2.0 * std::numbers::pi * halton(static_cast<unsigned>(i + 1), 3);
      probe({ct[0] + rr * std::cos(ph), ct[1] + rr * std::sin(ph)});
    }
  }
  if (rep.worst_distance >= chart.r) {
    rep.pass = false;
    rep.reason = "flattened ball leaves the chart";
  }
  return rep;
}

ExclusionReport check_exclusion_sets(const ExclusionSets& sets) {
  ExclusionReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  const int na = static_cast<int>(sets.per_axis.size());
  for (int i = 0; i < na; ++i)
    for (int j = i + 1; j < na; ++j)
      for (int p = 0; p < static_cast<int>(sets.per_axis[i].size()); ++p)
        for (int q = 0; q < static_cast<int>(sets.per_axis[j].size()); ++q) {
          const Ball& b1 = sets.per_axis[i][p];
          const Ball& b2 = sets.per_axis[j][q];
          const double gap = distance(b1.center, b2.center, sets.d) - (b1.radius + b2.radius + 2.0 * sets.eps);
          if (gap < rep.min_gap) {
            rep.min_gap = gap;
            rep.axis_i = i;
            rep.axis_j = j;
            rep.ball_i = p;
            rep.ball_j = q;
          }
        }
  rep.pass = rep.min_gap >= 0.0;
  return rep;
}

TimeHorizon time_horizon(const std::vector<Cone>& cones, const std::vector<Ball>& cylinders) {
  TimeHorizon h;
  h.pairwise_min = std::numeric_limits<double>::infinity();
  double min_height = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cones.size(); ++i) {
    min_height = std::min(min_height, cones[i].height());
    for (std::size_t j = i + 1; j < cones.size(); ++j) {
      const double dist = distance(cones[i].center, cones[j].center, cones[i].d);
      const double ht = (cones[i].R + cones[j].R - dist) / (cones[i].N + cones[j].N);
      if (ht > 0.0) h.pairwise_min = std::min(h.pairwise_min, ht);
    }
    for (const auto& cyl : cylinders) {
      const double dist = distance(cones[i].center, cyl.center, cones[i].d);
      const double ht = std::min((cones[i].R + cyl.radius - dist) / cones[i].N, cones[i].height());
      h.cylinder_max = std::max(h.cylinder_max, ht);
    }
  }
  h.t1 = std::min(h.pairwise_min, min_height);
  if (h.cylinder_max > 0.0) h.t1 = std::min(h.t1, h.cylinder_max);
  return h;
}

}  // namespace dflux
