#include "dflux/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace dflux {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Test functions

namespace {

double beta(double s) {
  if (s <= -1.0 || s >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return q * q * q;
}

double beta_prime(double s) {
  if (s <= -1.0 || s >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return -6.0 * s * q * q;
}

// max |beta'| is attained at s^2 = 1/5.
const double kBetaPrimeMax = 96.0 / (25.0 * std::sqrt(5.0));

// sup over the square of |grad (beta(a) beta(b))|.
double product_gradient_max() {
  static const double v = [] {
    double best = 0.0;
    const int n = 801;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const double a = -1.0 + 2.0 * i / (n - 1.0), b = -1.0 + 2.0 * k / (n - 1.0);
        best = std::max(best, std::hypot(beta_prime(a) * beta(b), beta(a) * beta_prime(b)));
      }
    return best;
  }();
  return v;
}

}  // namespace

Bump::Bump(int d, double t0, const Point& x0, double rt, double rx) : d_(d), t0_(t0), x0_(x0), rt_(rt), rx_(rx) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("bump dimension must be 1 or 2");
  if (!(rt > 0.0 && rx > 0.0)) throw std::invalid_argument("bump radii must be positive");
}

double Bump::value(double t, const Point& x) const {
  double v = beta((t - t0_) / rt_);
  for (int k = 0; k < d_ && v != 0.0; ++k) v *= beta((x[k] - x0_[k]) / rx_);
  return v;
}

double Bump::dt(double t, const Point& x) const {
  double v = beta_prime((t - t0_) / rt_) / rt_;
  for (int k = 0; k < d_ && v != 0.0; ++k) v *= beta((x[k] - x0_[k]) / rx_);
  return v;
}

Point Bump::grad(double t, const Point& x) const {
  Point g{0.0, 0.0};
  const double bt = beta((t - t0_) / rt_);
  if (bt == 0.0) return g;
  double b[kMaxDim], db[kMaxDim];
  for (int k = 0; k < d_; ++k) {
    const double s = (x[k] - x0_[k]) / rx_;
    b[k] = beta(s);
    db[k] = beta_prime(s) / rx_;
  }
  for (int k = 0; k < d_; ++k) {
    double v = bt * db[k];
    for (int m = 0; m < d_; ++m)
      if (m != k) v *= b[m];
    g[k] = v;
  }
  return g;
}

Support Bump::support() const {
  Support s;
  s.t_lo = t0_ - rt_;
  s.t_hi = t0_ + rt_;
  s.box.d = d_;
  for (int k = 0; k < d_; ++k) {
    s.box.lo[k] = x0_[k] - rx_;
    s.box.hi[k] = x0_[k] + rx_;
  }
  return s;
}

double Bump::c1_norm() const {
  const double gx = d_ == 1 ? kBetaPrimeMax : product_gradient_max();
  return std::max({1.0, kBetaPrimeMax / rt_, gx / rx_});
}

PulledBack::PulledBack(TestFunctionPtr phi, Interface iface) : phi_(std::move(phi)), iface_(std::move(iface)) {
  set_id(phi_->id());
  // Sampled sup norms over the support.
  const Support s = support();
  const int d = iface_.dim();
  const int n = d == 1 ? 401 : 61, nt = 33;
  norm_ = 0.0;
  for (int q = 0; q < nt; ++q) {
    const double t = s.t_lo + (s.t_hi - s.t_lo) * q / (nt - 1.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < (d == 2 ? n : 1); ++k) {
        Point x{s.box.lo[0] + (s.box.hi[0] - s.box.lo[0]) * i / (n - 1.0), 0.0};
        if (d == 2) x[1] = s.box.lo[1] + (s.box.hi[1] - s.box.lo[1]) * k / (n - 1.0);
        const Point g = grad(t, x);
        norm_ = std::max({norm_, value(t, x), std::abs(dt(t, x)), norm(g, d)});
      }
  }
  norm_ = std::max(norm_, phi_->c1_norm());
}

double PulledBack::value(double t, const Point& xt) const { return phi_->value(t, unflatten(iface_, xt)); }

double PulledBack::dt(double t, const Point& xt) const { return phi_->dt(t, unflatten(iface_, xt)); }

Point PulledBack::grad(double t, const Point& xt) const {
  const Point g = phi_->grad(t, unflatten(iface_, xt));
  if (iface_.dim() == 1) return g;
  const int j = iface_.axis(), tg = 1 - j;
  Point out = g;
  out[tg] = g[tg] + iface_.zeta_derivative(xt) * g[j];
  return out;
}

Support PulledBack::support() const {
  Support s = phi_->support();
  const int j = iface_.axis();
  double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
  if (iface_.dim() == 1) {
    zmin = zmax = iface_.zeta_at(0.0);
  } else {
    const int tg = 1 - j;
    for (int i = 0; i <= 256; ++i) {
      const double v = iface_.zeta_at(s.box.lo[tg] + (s.box.hi[tg] - s.box.lo[tg]) * i / 256.0);
      zmin = std::min(zmin, v);
      zmax = std::max(zmax, v);
    }
  }
  const double margin = 1e-3 * (s.box.hi[j] - s.box.lo[j]);
  s.box.lo[j] -= zmax + margin;
  s.box.hi[j] -= zmin - margin;
  return s;
}

double PulledBack::c1_norm() const { return norm_; }

Combination::Combination(std::vector<double> coeffs, std::vector<TestFunctionPtr> terms)
    : c_(std::move(coeffs)), terms_(std::move(terms)) {
  if (c_.size() != terms_.size() || terms_.empty())
    throw std::invalid_argument("combination needs one coefficient per term");
  for (double c : c_)
    if (c < 0.0) throw std::invalid_argument("combination coefficients must be nonnegative");
}

double Combination::value(double t, const Point& x) const {
  double v = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) v += c_[i] * terms_[i]->value(t, x);
  return v;
}

double Combination::dt(double t, const Point& x) const {
  double v = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) v += c_[i] * terms_[i]->dt(t, x);
  return v;
}

Point Combination::grad(double t, const Point& x) const {
  Point g{0.0, 0.0};
  for (std::size_t i = 0; i < c_.size(); ++i) {
    const Point gi = terms_[i]->grad(t, x);
    g[0] += c_[i] * gi[0];
    g[1] += c_[i] * gi[1];
  }
  return g;
}

Support Combination::support() const {
  Support s = terms_[0]->support();
  for (std::size_t i = 1; i < terms_.size(); ++i) {
    const Support si = terms_[i]->support();
    s.t_lo = std::min(s.t_lo, si.t_lo);
    s.t_hi = std::max(s.t_hi, si.t_hi);
    for (int k = 0; k < s.box.d; ++k) {
      s.box.lo[k] = std::min(s.box.lo[k], si.box.lo[k]);
      s.box.hi[k] = std::max(s.box.hi[k], si.box.hi[k]);
    }
  }
  return s;
}

double Combination::c1_norm() const {
  double v = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) v += c_[i] * terms_[i]->c1_norm();
  return v;
}

// ---------------------------------------------------------------------------
// Traces

void TraceField::write_csv(const std::string& path) const {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot write " + path);
  std::fputs("t,s,p_u\n", fp);
  for (std::size_t n = 0; n < times.size(); ++n)
    for (std::size_t m = 0; m < s.size(); ++m) std::fprintf(fp, "%.17g,%.17g,%.17g\n", times[n], s[m], p[n][m]);
  std::fclose(fp);
}

TraceField interface_trace(const Trajectory& frames, const Interface& iface, double a, double b, double eps) {
  if (frames.empty()) throw std::invalid_argument("empty trajectory");
  if (!(eps > 0.0)) throw DomainError("trace resolution width must be positive");
  const Grid& g = frames.front().grid;
  const int d = g.dim();
  if (iface.dim() != d) throw DomainError("interface and grid dimensions differ");
  const int j = iface.axis();
  const int tg = d == 2 ? 1 - j : 0;
  const int nj = g.cells(j);
  const int nt = d == 2 ? g.cells(tg) : 1;
  const double h = g.dx(j), lo = g.box().lo[j];

  TraceField tr;
  tr.stencil = "linear extrapolation from cells 2 and 3 on each side, averaged";
  // Per tangential column: interface position and the four stencil cells.
  struct Column {
    double xs;
    int l2, l3, r2, r3;
  };
  std::vector<Column> cols;
  for (int m = 0; m < nt; ++m) {
    const double s = d == 2 ? g.box().lo[tg] + (m + 0.5) * g.dx(tg) : 0.0;
    const double xs = iface.zeta_at(s);
    int resolved = 0, il = -1, ir = nj;
    for (int i = 0; i < nj; ++i) {
      const double c = lo + (i + 0.5) * h;
      if (std::abs(c - xs) <= 4.0 * eps) ++resolved;
      if (c < xs) il = i;
      if (c > xs && ir == nj) ir = i;
    }
    if (resolved < 4) {
      std::ostringstream os;
      os << "interface unresolved: " << resolved << " cell centers within 4 eps = " << 4.0 * eps
         << " of the interface at s = " << s;
      throw DomainError(os.str());
    }
    if (il - 2 < 0 || ir + 2 >= nj) throw DomainError("interface too close to the grid boundary for the trace");
    cols.push_back({xs, il - 1, il - 2, ir + 1, ir + 2});
    tr.s.push_back(s);
    tr.ds.push_back(d == 2 ? g.dx(tg) : 1.0);
  }
  auto cell = [&](int i, int m) -> std::size_t {
    if (d == 1) return i;
    return j == 0 ? g.index(i, m) : g.index(m, i);
  };
  auto center = [&](int i) { return lo + (i + 0.5) * h; };
  for (const auto& f : frames) {
    if (f.grid != g) throw DomainError("trajectory frames live on different grids");
    tr.times.push_back(f.t);
    std::vector<double> row;
    for (int m = 0; m < nt; ++m) {
      const Column& c = cols[m];
      const double ul2 = f.u[cell(c.l2, m)], ul3 = f.u[cell(c.l3, m)];
      const double ur2 = f.u[cell(c.r2, m)], ur3 = f.u[cell(c.r3, m)];
      const double pl = ul2 + (ul2 - ul3) * (c.xs - center(c.l2)) / (center(c.l2) - center(c.l3));
      const double pr = ur2 + (ur2 - ur3) * (c.xs - center(c.r2)) / (center(c.r2) - center(c.r3));
      row.push_back(std::clamp(0.5 * (pl + pr), a, b));
    }
    tr.p.push_back(std::move(row));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Residual quadrature

namespace {

std::vector<double> trapezoid_weights(const Trajectory& frames) {
  const std::size_t n = frames.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = frames[i + 1].t - frames[i].t;
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

// Index range [first, last] of cells along an axis whose centers fall in [lo, hi].
std::pair<int, int> cell_range(const Grid& g, int axis, double lo, double hi) {
  const double h = g.dx(axis), x0 = g.box().lo[axis];
  int first = static_cast<int>(std::floor((lo - x0) / h - 0.5));
  int last = static_cast<int>(std::ceil((hi - x0) / h - 0.5));
  first = std::max(first, 0);
  last = std::min(last, g.cells(axis) - 1);
  return {first, last};
}

void check_frames(const Trajectory& frames) {
  if (frames.empty()) throw std::invalid_argument("empty trajectory");
  for (const auto& f : frames)
    if (f.grid != frames.front().grid) throw DomainError("trajectory frames live on different grids");
}

template <class CellFn>
void for_support_cells(const Grid& g, const Support& s, CellFn&& fn) {
  const auto r0 = cell_range(g, 0, s.box.lo[0], s.box.hi[0]);
  if (g.dim() == 1) {
    for (int i = r0.first; i <= r0.second; ++i) fn(g.index(i));
    return;
  }
  const auto r1 = cell_range(g, 1, s.box.lo[1], s.box.hi[1]);
  for (int i = r0.first; i <= r0.second; ++i)
    for (int k = r1.first; k <= r1.second; ++k) fn(g.index(i, k));
}

ResidualTerms residual_core(const Trajectory& frames, const PiecewiseFlux& model, double lambda,
                            const TestFunction& phi, const TraceField* trace) {
  if (!(lambda >= model.lower() && lambda <= model.upper())) {
    std::ostringstream os;
    os << "lambda " << lambda << " outside [" << model.lower() << ", " << model.upper() << "]";
    throw DomainError(os.str());
  }
  check_frames(frames);
  const Grid& g = frames.front().grid;
  if (g.dim() != model.dim()) throw DomainError("trajectory and flux dimensions differ");
  const int d = g.dim();
  const bool jump = model.has_jump();
  if (jump) {
    if (!trace) throw std::invalid_argument("a model with an interface jump needs a trace");
    if (trace->times.size() != frames.size()) throw DomainError("trace and trajectory frames differ");
  }
  const auto w = trapezoid_weights(frames);
  const Support sup = phi.support();
  const double vol = g.cell_volume();
  ResidualTerms r;

  // Per-cell lambda terms do not depend on the frame.
  std::vector<std::size_t> cells;
  for_support_cells(g, sup, [&](std::size_t idx) { cells.push_back(idx); });
  std::vector<FluxVector> f_lambda(cells.size());
  std::vector<double> div_lambda(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Point x = g.center(cells[c]);
    f_lambda[c] = model.value(x, lambda);
    div_lambda[c] = model.smooth_divergence(x, lambda);
  }

  for (std::size_t n = 0; n < frames.size(); ++n) {
    const Field& f = frames[n];
    if (f.t < sup.t_lo || f.t > sup.t_hi) continue;
    const double wn = w[n] * vol;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Point x = g.center(cells[c]);
      const double pv = phi.value(f.t, x), pt = phi.dt(f.t, x);
      const Point gr = phi.grad(f.t, x);
      if (pv == 0.0 && pt == 0.0 && gr[0] == 0.0 && gr[1] == 0.0) continue;
      const double u = f.u[cells[c]];
      const double sg = sgn(u - lambda);
      if (n == 0) r.initial += vol * std::abs(u - lambda) * pv;
      if (wn == 0.0) continue;
      r.time += wn * std::abs(u - lambda) * pt;
      if (sg != 0.0) {
        const FluxVector fu = model.value(x, u);
        double dot = 0.0;
        for (int k = 0; k < d; ++k) dot += (fu[k] - f_lambda[c][k]) * gr[k];
        r.flux += wn * sg * dot;
        r.source -= wn * sg * div_lambda[c] * pv;
      }
    }
  }
  if (jump) {
    const Interface& iface = model.interface();
    for (std::size_t n = 0; n < frames.size(); ++n) {
      const double t = frames[n].t;
      if (w[n] == 0.0 || t < sup.t_lo || t > sup.t_hi) continue;
      for (std::size_t m = 0; m < trace->s.size(); ++m) {
        const Point xg = iface.point_on(trace->s[m]);
        const double pv = phi.value(t, xg);
        if (pv == 0.0) continue;
        const double sg = sgn(trace->p[n][m] - lambda);
        if (sg == 0.0) continue;
        r.interface -= w[n] * trace->ds[m] * sg * model.normal_jump(xg, lambda) * pv;
      }
    }
  }
  return r;
}

}  // namespace

ResidualTerms kruzhkov_terms(const Trajectory& frames, const PiecewiseFlux& model, double lambda,
                             const TestFunction& phi, const TraceField* trace) {
  return residual_core(frames, model, lambda, phi, trace);
}

double kruzhkov_residual(const Trajectory& frames, const PiecewiseFlux& model, double lambda,
                         const TestFunction& phi, const TraceField* trace) {
  return kruzhkov_terms(frames, model, lambda, phi, trace).total();
}

ResidualTerms transformed_terms(const Trajectory& flat_frames, const PiecewiseFlux& model, double lambda,
                                const TestFunction& phi, const TraceField* trace) {
  return residual_core(flat_frames, flatten_model(model), lambda, phi, trace);
}

double transformed_entropy_residual(const Trajectory& flat_frames, const PiecewiseFlux& model, double lambda,
                                    const TestFunction& phi, const TraceField* trace) {
  return transformed_terms(flat_frames, model, lambda, phi, trace).total();
}

double kato_residual(const Trajectory& u1, const Trajectory& u2, const PiecewiseFlux& model,
                     const TestFunction& phi) {
  check_frames(u1);
  check_frames(u2);
  if (u1.size() != u2.size() || u1.front().grid != u2.front().grid)
    throw DomainError("Kato pairing needs trajectories on one grid");
  for (std::size_t n = 0; n < u1.size(); ++n)
    if (u1[n].t != u2[n].t) throw DomainError("Kato pairing needs matching frame times");
  const Grid& g = u1.front().grid;
  const int d = g.dim();
  const auto w = trapezoid_weights(u1);
  const Support sup = phi.support();
  const double vol = g.cell_volume();
  std::vector<std::size_t> cells;
  for_support_cells(g, sup, [&](std::size_t idx) { cells.push_back(idx); });
  double r = 0.0;
  for (std::size_t n = 0; n < u1.size(); ++n) {
    const double t = u1[n].t;
    if (t < sup.t_lo || t > sup.t_hi) continue;
    for (std::size_t idx : cells) {
      const double a = u1[n].u[idx], b = u2[n].u[idx];
      if (a == b) continue;
      const Point x = g.center(idx);
      const double pv = phi.value(t, x);
      if (n == 0) r += vol * std::abs(a - b) * pv;
      if (w[n] == 0.0) continue;
      const double pt = phi.dt(t, x);
      const Point gr = phi.grad(t, x);
      const double sg = sgn(a - b);
      const FluxVector fa = model.value(x, a), fb = model.value(x, b);
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += (fa[k] - fb[k]) * gr[k];
      const double src = model.smooth_divergence(x, a) - model.smooth_divergence(x, b);
      r += w[n] * vol * (std::abs(a - b) * pt + sg * dot - sg * src * pv);
    }
  }
  return r;
}

double l1_distance(const Field& u1, const Field& u2) {
  if (u1.grid != u2.grid || u1.u.size() != u2.u.size()) throw DomainError("l1 distance needs one grid");
  double s = 0.0;
  for (std::size_t i = 0; i < u1.u.size(); ++i) s += std::abs(u1.u[i] - u2.u[i]);
  return s * u1.grid.cell_volume();
}

double residual_tolerance(const TestFunction& phi, double T, const Box& box, double tol_factor) {
  return tol_factor * phi.c1_norm() * T * box.volume();
}

std::vector<double> lambda_battery(double a, double b) {
  std::vector<double> out;
  for (int k = 1; k <= 9; ++k) out.push_back(a + k * (b - a) / 10.0);
  out.push_back(a);
  out.push_back(b);
  return out;
}

std::vector<TestFunctionPtr> bump_battery(double T, const Box& box, int count) {
  std::vector<TestFunctionPtr> out;
  double side = box.hi[0] - box.lo[0];
  for (int k = 1; k < box.d; ++k) side = std::min(side, box.hi[k] - box.lo[k]);
  for (int i = 1; i <= count; ++i) {
    const unsigned ui = static_cast<unsigned>(i);
    const double rt = T * (0.3 + 0.2 * halton(ui, 5));
    const double t0 = (T - rt) * halton(ui, 2);
    const double rx = side * (0.15 + 0.2 * halton(ui, 7));
    Point x0{0.0, 0.0};
    const unsigned bases[kMaxDim] = {3, 11};
    for (int k = 0; k < box.d; ++k)
      x0[k] = box.lo[k] + rx + (box.hi[k] - box.lo[k] - 2.0 * rx) * halton(ui, bases[k]);
    auto b = std::make_shared<Bump>(box.d, t0, x0, rt, rx);
    char id[16];
    std::snprintf(id, sizeof id, "bump%02d", i);
    b->set_id(id);
    out.push_back(b);
  }
  return out;
}

json EntropyReport::to_json() const {
  json arr = json::array();
  for (const auto& e : entries)
    arr.push_back({{"lambda", e.lambda}, {"phi_id", e.phi_id}, {"residual", e.residual}, {"tol", e.tol},
                   {"pass", e.pass}});
  json summary = {{"pass", pass}, {"count", entries.size()}, {"min_residual", min_residual},
                  {"min_scaled", min_scaled}};
  if (!entries.empty()) {
    summary["worst_lambda"] = entries[worst].lambda;
    summary["worst_phi"] = entries[worst].phi_id;
  }
  return {{"entries", arr}, {"summary", summary}};
}

namespace {

void finish_report(EntropyReport& rep, double tol_factor) {
  rep.pass = true;
  rep.min_residual = std::numeric_limits<double>::infinity();
  rep.min_scaled = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    const auto& e = rep.entries[i];
    rep.pass = rep.pass && e.pass;
    rep.min_residual = std::min(rep.min_residual, e.residual);
    const double scaled = e.residual / (e.tol / tol_factor);
    if (scaled < rep.min_scaled) {
      rep.min_scaled = scaled;
      rep.worst = i;
    }
  }
}

}  // namespace

EntropyReport entropy_battery(const Trajectory& frames, const PiecewiseFlux& model,
                              const std::vector<double>& lambdas, const std::vector<TestFunctionPtr>& phis,
                              const Box& box, double tol_factor, const TraceField* trace, ResidualKind kind) {
  check_frames(frames);
  const double T = frames.back().t - frames.front().t;
  const PiecewiseFlux eval_model = kind == ResidualKind::Transformed ? flatten_model(model) : model;
  EntropyReport rep;
  for (const auto& phi : phis) {
    const double tol = residual_tolerance(*phi, T, box, tol_factor);
    for (double l : lambdas) {
      const double r = residual_core(frames, eval_model, l, *phi, trace).total();
      rep.entries.push_back({l, phi->id(), r, tol, r >= -tol});
    }
  }
  finish_report(rep, tol_factor);
  return rep;
}

EntropyReport kato_battery(const Trajectory& u1, const Trajectory& u2, const PiecewiseFlux& model,
                           const std::vector<TestFunctionPtr>& phis, const Box& box, double tol_factor) {
  check_frames(u1);
  const double T = u1.back().t - u1.front().t;
  EntropyReport rep;
  for (const auto& phi : phis) {
    const double tol = residual_tolerance(*phi, T, box, tol_factor);
    const double r = kato_residual(u1, u2, model, *phi);
    rep.entries.push_back({std::numeric_limits<double>::quiet_NaN(), phi->id(), r, tol, r >= -tol});
  }
  finish_report(rep, tol_factor);
  return rep;
}

// ---------------------------------------------------------------------------
// Contraction and cones

ContractionReport contraction_check(const std::vector<std::pair<const Trajectory*, const Trajectory*>>& pairs,
                                    double eta) {
  ContractionReport rep;
  rep.eta = eta;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Trajectory& a = *pairs[p].first;
    const Trajectory& b = *pairs[p].second;
    if (a.size() != b.size() || a.empty()) throw DomainError("contraction pairs need matching frames");
    const double d0 = l1_distance(a.front(), b.front());
    double worst = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
      const double cur = l1_distance(a[n], b[n]);
      double ratio = 0.0;
      if (d0 > 0.0)
        ratio = cur / d0;
      else if (cur > 0.0)
        ratio = std::numeric_limits<double>::infinity();
      rep.entries.push_back({p, a[n].t, d0, cur, ratio});
      worst = std::max(worst, ratio);
    }
    rep.pair_worst.push_back(worst);
    rep.worst_ratio = std::max(rep.worst_ratio, worst);
  }
  rep.pass = rep.worst_ratio <= 1.0 + eta;
  return rep;
}

double section_l1(const Field& u1, const Field& u2, const Cone& cone) {
  if (u1.grid != u2.grid) throw DomainError("section distance needs one grid");
  const Grid& g = u1.grid;
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (cone_contains(cone, u1.t, g.center(i))) s += std::abs(u1.u[i] - u2.u[i]);
  return s * g.cell_volume();
}

ConeLocalityReport cone_locality_check(const Trajectory& u1, const Trajectory& u2, const Cone& cone, double tol) {
  if (u1.size() != u2.size() || u1.empty()) throw DomainError("cone check needs matching frames");
  ConeLocalityReport rep;
  rep.tol = tol;
  for (std::size_t n = 0; n < u1.size(); ++n) {
    if (u1[n].t >= cone.height()) continue;
    const double v = section_l1(u1[n], u2[n], cone);
    rep.times.push_back(u1[n].t);
    rep.section_distance.push_back(v);
    rep.kappa = std::max(rep.kappa, v);
    if (n == 0 && v > 0.0) rep.data_coincide_on_base = false;
  }
  rep.pass = rep.kappa <= tol;
  return rep;
}

constexpr double kRoundoffL1 = 1e-12;

GronwallReport gronwall_check(const Trajectory& u1, const Trajectory& u2, const Cone& cone, double C) {
  if (u1.size() != u2.size() || u1.empty()) throw DomainError("Gronwall check needs matching frames");
  GronwallReport rep;
  rep.C = C;
  rep.initial = section_l1(u1.front(), u2.front(), cone);
  const int d = u1.front().grid.dim();
  for (std::size_t n = 0; n < u1.size(); ++n) {
    const double t = u1[n].t;
    if (t >= cone.height()) continue;
    const double cur = section_l1(u1[n], u2[n], cone);
    // Differences at roundoff level count as zero.
    double growth = 0.0;
    if (rep.initial > kRoundoffL1)
      growth = cur / rep.initial;
    else if (cur > kRoundoffL1)
      growth = std::numeric_limits<double>::infinity();
    rep.times.push_back(t);
    rep.growth.push_back(growth);
    rep.worst = std::max(rep.worst, growth / std::exp(2.0 * d * C * t));
  }
  rep.pass = rep.worst <= 1.0 + 1e-12;
  return rep;
}

}  // namespace dflux
