#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dflux/geometry.hpp"
#include "dflux/presets.hpp"

using namespace dflux;

namespace {

PiecewiseFlux scaled(const std::string& name, double c) {
  const auto m = make_preset(name);
  std::vector<FluxComponent> l, r;
  for (int k = 0; k < m.dim(); ++k)
    for (Side s : {Side::Left, Side::Right}) {
      const auto base = m.component(s, k);
      FluxComponent fc;
      fc.axis = k;
      fc.value = [base, c](const Point& x, double v) { return c * base(x, v); };
      fc.lambda_derivative = [base, c](const Point& x, double v) { return c * base.d_lambda(x, v); };
      (s == Side::Left ? l : r).push_back(fc);
    }
  return PiecewiseFlux(m.dim(), l, r, m.interface(), m.lower(), m.upper(), m.domain());
}

}  // namespace

TEST(Flatten, ZeroInterfaceIsIdentity) {
  const auto iface = Interface::zero(2, 0);
  const Point x{0.3, -0.7};
  EXPECT_EQ(flatten(iface, x), x);
  EXPECT_EQ(unflatten(iface, x), x);
}

TEST(Flatten, QuadraticInterfaceExample) {
  const Interface iface(2, 0, Interface::Kind::Poly, {0, 0, 1});
  const Point xt = flatten(iface, {1.0, 2.0});
  EXPECT_DOUBLE_EQ(xt[0], -3.0);
  EXPECT_DOUBLE_EQ(xt[1], 2.0);
}

TEST(Flatten, RoundTripOnRandomPoints) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& iface : {Interface(2, 0, Interface::Kind::Poly, {0.1, -0.4, 0.3}),
                            Interface(2, 1, Interface::Kind::Affine, {0.2, 0.25}),
                            Interface(1, 0, Interface::Kind::Affine, {0.3})}) {
    for (int i = 0; i < 1000; ++i) {
      const Point x{u(rng), iface.dim() == 2 ? u(rng) : 0.0};
      const Point y = unflatten(iface, flatten(iface, x));
      for (int k = 0; k < 2; ++k) ASSERT_NEAR(y[k], x[k], 1e-14);
    }
  }
}

TEST(TransformedNormalFlux, ConstantZetaGivesNormalComponent) {
  const auto m = make_preset("two_flux");
  const auto F = transformed_normal_flux(m, Side::Right);
  for (double l : {0.1, 0.5, 0.8}) EXPECT_DOUBLE_EQ(F({0.3, 0.0}, l), 2 * l * (1 - l));
}

TEST(TransformedNormalFlux, UnitSlopeExample) {
  const auto f1 = polynomial_component(0, {0, 1});
  const auto f2 = polynomial_component(1, {0, 0, 1});
  const PiecewiseFlux m(2, {f1, f2}, {f1, f2}, Interface(2, 0, Interface::Kind::Affine, {0, 1}), 0, 1);
  const auto F = transformed_normal_flux(m, Side::Left);
  for (double l : {0.0, 0.3, 0.9}) EXPECT_NEAR(F({0.2, -0.4}, l), l - l * l, 1e-15);
}

TEST(TransformedNormalFlux, QuadraticZetaMatchesExpandedOracle) {
  FluxComponent f1, f2;
  f1.axis = 0;
  f1.value = [](const Point& x, double l) { return x[0] * l * (1 - l); };
  f2.axis = 1;
  f2.value = [](const Point& x, double l) { return (1 + x[1]) * l * l; };
  const double c0 = 0.1, c1 = -0.5, c2 = 0.8;
  const PiecewiseFlux m(2, {f1, f2}, {f1, f2}, Interface(2, 0, Interface::Kind::Poly, {c0, c1, c2}), 0, 1);
  const auto F = transformed_normal_flux(m, Side::Left);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ul(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double y1 = u(rng), y2 = u(rng), l = ul(rng);
    // Expanded by hand: x1 = y1 + c0 + c1 y2 + c2 y2^2, zeta' = c1 + 2 c2 y2.
    const double x1 = y1 + c0 + c1 * y2 + c2 * y2 * y2;
    const double oracle = x1 * l * (1 - l) - (c1 + 2 * c2 * y2) * (1 + y2) * l * l;
    ASSERT_NEAR(F({y1, y2}, l), oracle, 1e-13);
  }
}

TEST(FlattenModel, DerivativesAgreeWithDifferences) {
  auto m = make_preset("two_flux_2d");
  FluxComponent f1;
  f1.axis = 0;
  f1.value = [](const Point& x, double l) { return (1 + 0.3 * x[0] * x[1]) * l * (1 - l); };
  f1.lambda_derivative = [](const Point& x, double l) { return (1 + 0.3 * x[0] * x[1]) * (1 - 2 * l); };
  f1.x_derivative = [](const Point& x, double l, int k) { return 0.3 * x[1 - k] * l * (1 - l); };
  f1.x_derivative_of_lambda_derivative = [](const Point& x, double l, int k) {
    return 0.3 * x[1 - k] * (1 - 2 * l);
  };
  m = PiecewiseFlux(2, {f1, m.component(Side::Left, 1)}, {m.component(Side::Right, 0), m.component(Side::Right, 1)},
                    Interface(2, 0, Interface::Kind::Poly, {0.0, 0.25, 0.2}), 0, 1);
  const auto flat = flatten_model(m);
  EXPECT_TRUE(flat.interface().is_flat());
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ul(0.05, 0.95);
  for (int i = 0; i < 200; ++i) {
    const Point x{u(rng), u(rng)};
    const double l = ul(rng);
    for (Side s : {Side::Left, Side::Right})
      for (int k = 0; k < 2; ++k) {
        const auto& c = flat.component(s, k);
        for (int ax = 0; ax < 2; ++ax) {
          const double h = 1e-6;
          Point xp = x, xm = x;
          xp[ax] += h;
          xm[ax] -= h;
          const double fd = (c(xp, l) - c(xm, l)) / (2 * h);
          ASSERT_NEAR(c.d_x(x, l, ax), fd, 1e-6 * (1 + std::abs(fd)));
          const double fdl = (c.d_lambda(xp, l) - c.d_lambda(xm, l)) / (2 * h);
          ASSERT_NEAR(c.d_x_lambda(x, l, ax), fdl, 1e-6 * (1 + std::abs(fdl)));
        }
      }
  }
  // The flattened box of [-1, 1]^2 under x~1 = x1 - 0.25 x2 - 0.2 x2^2.
  EXPECT_NEAR(flat.domain().lo[0], -1.45, 1e-12);
  EXPECT_NEAR(flat.domain().hi[0], 1.0 + 0.25 * 0.25 / (4 * 0.2), 1e-6);
}

TEST(FlattenModel, FlatEquationMatchesOriginal) {
  const auto m = make_preset("two_flux_2d");
  const auto flat = flatten_model(m);
  const Point x{0.4, -0.6};
  const Point xt = flatten(m.interface(), x);
  const auto f = m.eval(x, 0.3);
  EXPECT_NEAR(flat.eval(xt, 0.3)[0], f[0] - 0.25 * f[1], 1e-15);
  EXPECT_NEAR(flat.eval(xt, 0.3)[1], f[1], 1e-15);
}

TEST(RadialExtend, IdentityInsideAndProjectionOutside) {
  const Point c{0.2, -0.1};
  const double R = 0.5;
  ScalarField f = [](const Point& x, double l) { return std::sin(3 * x[0]) * std::cos(2 * x[1]) * l; };
  const auto g = radial_extend(f, c, R, 2);
  EXPECT_EQ(g({0.3, 0.0}, 0.7), f({0.3, 0.0}, 0.7));
  EXPECT_DOUBLE_EQ(g({c[0] + 2 * R, c[1]}, 0.7), f({c[0] + R, c[1]}, 0.7));
  EXPECT_THROW(radial_extend(f, c, 0.0, 2), DomainError);
}

TEST(RadialExtend, ConstantAlongRays) {
  const Point c{-0.3, 0.4};
  const double R = 0.7;
  ScalarField f = [](const Point& x, double l) { return x[0] * x[0] - x[1] + l; };
  const auto g = radial_extend(f, c, R, 2);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), sd(1.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const double th = ang(rng), s = sd(rng) * R;
    const Point v{std::cos(th), std::sin(th)};
    const Point far{c[0] + s * v[0], c[1] + s * v[1]};
    const Point edge{c[0] + R * v[0], c[1] + R * v[1]};
    ASSERT_NEAR(g(far, 0.5), g(edge, 0.5), 1e-14);
  }
}

TEST(RadialExtend, LipschitzQuotientsOutsideBoundedByInside) {
  const Point c{0.1, 0.0};
  const double R = 0.5;
  ScalarField f = [](const Point& x, double) { return std::sin(4 * x[0]) + x[1] * x[1]; };
  const auto g = radial_extend(f, c, R, 2);
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double inside = 0.0, outside = 0.0;
  int n_in = 0, n_out = 0;
  while (n_in < 10000 || n_out < 10000) {
    const Point x{c[0] + 2 * u(rng), c[1] + 2 * u(rng)};
    const Point y{x[0] + 0.05 * u(rng), x[1] + 0.05 * u(rng)};
    const double dxy = distance(x, y, 2);
    if (dxy == 0.0) continue;
    const double q = std::abs(g(x, 0) - g(y, 0)) / dxy;
    const bool in_x = distance(x, c, 2) <= R, in_y = distance(y, c, 2) <= R;
    if (in_x && in_y && n_in < 10000) {
      inside = std::max(inside, q);
      ++n_in;
    } else if (!in_x && !in_y && n_out < 10000) {
      outside = std::max(outside, q);
      ++n_out;
    }
  }
  // Two-point quotients inside the ball estimate the Lipschitz constant from below;
  // the gradient bound on the ball is the sharp oracle.
  double grad = 0.0;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      const Point x{c[0] - R + 2 * R * i / 400.0, c[1] - R + 2 * R * j / 400.0};
      if (distance(x, c, 2) > R) continue;
      grad = std::max(grad, std::hypot(4 * std::cos(4 * x[0]), 2 * x[1]));
    }
  EXPECT_LE(outside, grad * (1 + 1e-9));
  EXPECT_LE(inside, grad * (1 + 1e-9));
}

TEST(RadialExtend, ModelComponentsAndDerivatives) {
  const auto m = make_preset("sedimentation");
  const auto e = radial_extend(m, {0.0, 0.0}, 0.5);
  EXPECT_DOUBLE_EQ(e.eval({-0.9, 0.0}, 0.3)[0], m.eval({-0.5, 0.0}, 0.3)[0]);
  EXPECT_DOUBLE_EQ(e.eval({0.2, 0.0}, 0.3)[0], m.eval({0.2, 0.0}, 0.3)[0]);
  EXPECT_DOUBLE_EQ(e.component(Side::Left, 0).d_x({-0.9, 0.0}, 0.3, 0), 0.0);
  EXPECT_DOUBLE_EQ(e.component(Side::Left, 0).d_x({-0.2, 0.0}, 0.3, 0),
                   m.component(Side::Left, 0).d_x({-0.2, 0.0}, 0.3, 0));
}

TEST(SpeedBound, BurgersIsOne) {
  const auto rep = speed_bound(make_preset("burgers"), 1.0, 1.0);
  double oracle = 0.0;
  for (int i = 0; i <= 100000; ++i) oracle = std::max(oracle, std::abs(1 - 2 * (i / 100000.0)));
  EXPECT_NEAR(rep.value, oracle, 1e-6);
  EXPECT_NEAR(rep.value, 1.0, 1e-6);
}

TEST(SpeedBound, TwoFluxIsRootFive) {
  const auto rep = speed_bound(make_preset("two_flux"), 1.0, 1.0);
  double oracle = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double l = i / 100000.0;
    oracle = std::max(oracle, std::hypot(1 - 2 * l, 2 - 4 * l));
  }
  EXPECT_NEAR(rep.value, oracle, 1e-6);
  EXPECT_NEAR(rep.value, std::sqrt(5.0), 1e-6);
  EXPECT_GT(rep.points, 0);
}

TEST(SpeedBound, HomogeneousUnderScaling) {
  for (const auto& name : preset_names()) {
    const double n1 = speed_bound(make_preset(name), 1.0, 1.0).value;
    const double n3 = speed_bound(scaled(name, 3.0), 1.0, 1.0).value;
    EXPECT_NEAR(n3, 3.0 * n1, 1e-12 * n3) << name;
  }
}

TEST(SpeedBound, MonotoneInStateBound) {
  for (const auto& name : preset_names()) {
    const auto m = make_preset(name);
    double prev = 0.0;
    for (double M : {0.0, 0.1, 0.3, 0.5, 0.8, 1.0, 2.0}) {
      const double v = speed_bound(m, 1.0, M).value;
      EXPECT_GE(v, prev) << name << " " << M;
      prev = v;
    }
  }
}

TEST(SpeedBound, EmptySampleIsAnError) {
  const auto m = make_preset("burgers");
  EXPECT_THROW(speed_bound(m, 1.0, -1.0), DomainError);
  SampleGrid g;
  g.lambda_samples = 0;
  EXPECT_THROW(speed_bound(m, 1.0, 1.0, g), DomainError);
  EXPECT_THROW(speed_bound(m, 0.0, 1.0), DomainError);
}

TEST(MixedDerivativeBound, SedimentationOracle) {
  EXPECT_EQ(mixed_derivative_bound(make_preset("burgers"), 1.0, 1.0).value, 0.0);
  double oracle = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double l = i / 20000.0;
    oracle = std::max(oracle, std::abs(0.5 * (1 - 4 * l + 3 * l * l)));
  }
  EXPECT_NEAR(mixed_derivative_bound(make_preset("sedimentation"), 1.0, 1.0).value, oracle, 1e-9);
}

TEST(Cone, ContainsExamples) {
  const Cone c{1, {0.0, 0.0}, 0.5, 2.0};
  EXPECT_TRUE(cone_contains(c, 0.0, c.center));
  EXPECT_FALSE(cone_contains(c, c.R / c.N, c.center));
  const double t = c.R / (2 * c.N);
  EXPECT_TRUE(cone_contains(c, t, {c.R / 2 - 1e-9, 0.0}));
  EXPECT_FALSE(cone_contains(c, t, {c.R / 2, 0.0}));
  EXPECT_THROW(cone_contains(c, -1.0, c.center), DomainError);
}

TEST(Cone, SectionsAreNested) {
  const Cone c{2, {0.1, -0.2}, 0.8, 1.5};
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ut(0.0, 0.6);
  for (int i = 0; i < 5000; ++i) {
    double t1 = ut(rng), t2 = ut(rng);
    if (t1 > t2) std::swap(t1, t2);
    const Point x{u(rng), u(rng)};
    if (cone_contains(c, t2, x)) ASSERT_TRUE(cone_contains(c, t1, x));
  }
}

TEST(ConeCutoff, DisplayedFormulaAndSupportConvention) {
  const double eps = 0.01;
  const Cone ci{1, {0.0, 0.0}, 0.5, 1.0};
  const Cone cj{1, {0.2, 0.0}, 0.5, 1.0};
  // Deep inside both: both factors vanish.
  EXPECT_EQ(cone_cutoff_chi_raw(ci, cj, eps, 0.1, {0.1, 0.0}), 1.0);
  EXPECT_EQ(cone_cutoff_chi(ci, cj, eps, 0.1, {0.1, 0.0}), 1.0);
  // Outside cone i by 2 eps at t = 0, inside the layer of cone j.
  const Point x{-0.5 - 2 * eps, 0.0};
  const double aj = (std::abs(x[0] - 0.2) - 0.5 + eps) / eps;
  EXPECT_DOUBLE_EQ(cone_cutoff_chi_raw(ci, cj, eps, 0.0, x), 1.0 - smoothstep(aj));
  // Outside both by 2 eps.
  EXPECT_EQ(cone_cutoff_chi(ci, cj, eps, 0.0, {0.7 + 2 * eps, 0.0}), 0.0);
  EXPECT_EQ(cone_cutoff_chi(ci, cj, eps, 0.0, {-0.5 - 2 * eps, 0.0}), 0.0);
  // A point outside i but deep inside j: the raw formula says 1, the support convention 0.
  const Cone ck{1, {0.9, 0.0}, 0.5, 1.0};
  EXPECT_EQ(cone_cutoff_chi_raw(ci, ck, eps, 0.0, {0.9, 0.0}), 1.0);
  EXPECT_EQ(cone_cutoff_chi(ci, ck, eps, 0.0, {0.9, 0.0}), 0.0);
  EXPECT_THROW(cone_cutoff_chi(ci, cj, 0.0, 0.0, x), DomainError);
}

TEST(ConeCutoff, BoundedAndSupportedInIntersection) {
  const double eps = 0.02;
  const Cone ci{2, {0.0, 0.0}, 0.6, 1.0};
  const Cone cj{2, {0.3, 0.1}, 0.5, 1.0};
  std::mt19937 rng(10);
  std::uniform_real_distribution<double> u(-1.2, 1.2), ut(0.0, 0.5);
  for (int i = 0; i < 5000; ++i) {
    const Point x{u(rng), u(rng)};
    const double t = ut(rng);
    const double v = cone_cutoff_chi(ci, cj, eps, t, x);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    if (!cone_contains(ci, t, x) || !cone_contains(cj, t, x)) ASSERT_EQ(v, 0.0);
  }
}

TEST(Chart, Validation) {
  Chart ch;
  ch.center = {0.0, 0.0};
  ch.r = 0.5;
  ch.iface = Interface(2, 0, Interface::Kind::Affine, {0.0, 0.25});
  ch.R = 0.3;
  EXPECT_TRUE(validate_chart(ch).pass);
  ch.R = 0.49;
  EXPECT_FALSE(validate_chart(ch).pass);
  ch.R = 0.0;
  EXPECT_FALSE(validate_chart(ch).pass);
}

TEST(ExclusionSets, PairwiseDisjointness) {
  ExclusionSets s;
  s.d = 2;
  s.eps = 0.05;
  s.per_axis = {{{{0.0, 0.0}, 0.2}}, {{{0.6, 0.0}, 0.2}}};
  auto rep = check_exclusion_sets(s);
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.min_gap, 0.1, 1e-15);
  s.per_axis[1][0].center = {0.45, 0.0};
  rep = check_exclusion_sets(s);
  EXPECT_FALSE(rep.pass);
  EXPECT_EQ(rep.axis_i, 0);
  EXPECT_EQ(rep.axis_j, 1);
}

TEST(TimeHorizon, ReportsBothHeightsAndTheirMinimum) {
  const std::vector<Cone> cones{{1, {0.0, 0.0}, 0.5, 1.0}, {1, {0.6, 0.0}, 0.5, 1.0}};
  const std::vector<Ball> cyl{{{0.2, 0.0}, 0.05}};
  const auto h = time_horizon(cones, cyl);
  EXPECT_NEAR(h.pairwise_min, 0.2, 1e-15);
  EXPECT_NEAR(h.cylinder_max, 0.35, 1e-15);
  EXPECT_NEAR(h.t1, 0.2, 1e-15);
}
