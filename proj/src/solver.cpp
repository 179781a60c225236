#include "dflux/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dflux/geometry.hpp"

namespace dflux {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Grid and Field

Grid::Grid(const Box& box, std::array<int, kMaxDim> cells) : box_(box), n_(cells) {
  if (box.d < 1 || box.d > kMaxDim) throw std::invalid_argument("grid dimension must be 1 or 2");
  for (int k = 0; k < box.d; ++k) {
    if (n_[k] < 4) throw std::invalid_argument("grid needs at least 4 cells per axis");
    if (!(box.hi[k] > box.lo[k])) throw std::invalid_argument("grid box must have positive extent");
  }
  for (int k = box.d; k < kMaxDim; ++k) n_[k] = 1;
}

Grid Grid::line(double lo, double hi, int n) {
  Box b;
  b.d = 1;
  b.lo = {lo, 0.0};
  b.hi = {hi, 0.0};
  return Grid(b, {n, 1});
}

Grid Grid::square(const Box& box, int n) { return Grid(box, {n, box.d == 2 ? n : 1}); }

double Grid::dx_min() const {
  double m = dx(0);
  for (int k = 1; k < dim(); ++k) m = std::min(m, dx(k));
  return m;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int k = 0; k < dim(); ++k) v *= dx(k);
  return v;
}

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int k = 0; k < dim(); ++k) s *= static_cast<std::size_t>(n_[k]);
  return s;
}

std::array<int, kMaxDim> Grid::unravel(std::size_t idx) const {
  if (dim() == 1) return {static_cast<int>(idx), 0};
  return {static_cast<int>(idx / n_[1]), static_cast<int>(idx % n_[1])};
}

Point Grid::center(std::size_t idx) const {
  const auto m = unravel(idx);
  Point x{0.0, 0.0};
  for (int k = 0; k < dim(); ++k) x[k] = box_.lo[k] + (m[k] + 0.5) * dx(k);
  return x;
}

bool Grid::operator==(const Grid& o) const {
  if (dim() != o.dim()) return false;
  for (int k = 0; k < dim(); ++k) {
    if (n_[k] != o.n_[k]) return false;
    const double tol = 1e-9 * (box_.hi[k] - box_.lo[k]);
    if (std::abs(box_.lo[k] - o.box_.lo[k]) > tol || std::abs(box_.hi[k] - o.box_.hi[k]) > tol) return false;
  }
  return true;
}

bool Grid::refines(const Grid& coarse) const {
  if (dim() != coarse.dim()) return false;
  for (int k = 0; k < dim(); ++k) {
    if (n_[k] % coarse.n_[k] != 0) return false;
    const double tol = 1e-9 * (box_.hi[k] - box_.lo[k]);
    if (std::abs(box_.lo[k] - coarse.box_.lo[k]) > tol || std::abs(box_.hi[k] - coarse.box_.hi[k]) > tol)
      return false;
  }
  return true;
}

Field Field::sample(const Grid& g, const std::function<double(const Point&)>& f, double time) {
  Field out(g, 0.0, time);
  for (std::size_t i = 0; i < g.size(); ++i) out.u[i] = f(g.center(i));
  return out;
}

double Field::interpolate(const Point& x) const {
  const int d = grid.dim();
  int i0[kMaxDim]{0, 0};
  double w[kMaxDim]{0.0, 0.0};
  for (int k = 0; k < d; ++k) {
    const int n = grid.cells(k);
    const double s = (x[k] - grid.box().lo[k]) / grid.dx(k) - 0.5;
    if (s <= 0.0) {
      i0[k] = 0;
      w[k] = 0.0;
    } else if (s >= n - 1) {
      i0[k] = n - 2;
      w[k] = 1.0;
    } else {
      i0[k] = static_cast<int>(std::floor(s));
      w[k] = s - i0[k];
    }
  }
  if (d == 1) return (1.0 - w[0]) * u[i0[0]] + w[0] * u[i0[0] + 1];
  auto at = [&](int i, int j) { return u[grid.index(i, j)]; };
  const int i = i0[0], j = i0[1];
  return (1.0 - w[0]) * ((1.0 - w[1]) * at(i, j) + w[1] * at(i, j + 1)) +
         w[0] * ((1.0 - w[1]) * at(i + 1, j) + w[1] * at(i + 1, j + 1));
}

Field Field::block_average(const Grid& coarse) const {
  if (!grid.refines(coarse)) throw std::invalid_argument("block average needs an integer refinement");
  Field out(coarse, 0.0, t);
  const int r0 = grid.cells(0) / coarse.cells(0);
  const int r1 = grid.dim() == 2 ? grid.cells(1) / coarse.cells(1) : 1;
  const double inv = 1.0 / (static_cast<double>(r0) * r1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto m = grid.unravel(i);
    out.u[coarse.index(m[0] / r0, grid.dim() == 2 ? m[1] / r1 : 0)] += u[i] * inv;
  }
  return out;
}

double Field::integral() const {
  double s = 0.0;
  for (double v : u) s += v;
  return s * grid.cell_volume();
}

// ---------------------------------------------------------------------------
// Configuration

int RunConfig::dim() const {
  return std::visit([](const auto& f) {
    if constexpr (std::is_same_v<std::decay_t<decltype(f)>, PiecewiseFlux>) return f.dim();
    else return f.d;
  }, flux);
}

double RunConfig::lower() const {
  return std::visit([](const auto& f) {
    if constexpr (std::is_same_v<std::decay_t<decltype(f)>, PiecewiseFlux>) return f.lower();
    else return f.a;
  }, flux);
}

double RunConfig::upper() const {
  return std::visit([](const auto& f) {
    if constexpr (std::is_same_v<std::decay_t<decltype(f)>, PiecewiseFlux>) return f.upper();
    else return f.b;
  }, flux);
}

void RunConfig::validate() const {
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  if (smoothing_width && !(*smoothing_width > 0.0)) throw DomainError("smoothing width must be positive");
  if (!(T > 0.0)) throw DomainError("T must be positive");
  if (!(cfl > 0.0 && cfl < 1.0)) throw DomainError("cfl must lie in (0, 1)");
  if (std::holds_alternative<GeneralBVFlux>(flux) && mode == FluxMode::Smoothed)
    throw DomainError("a general BV flux can only be mollified");
  for (double t : output_times)
    if (!(t > 0.0 && t <= T)) throw DomainError("output times must lie in (0, T]");
  if (speed && !(*speed >= 0.0)) throw DomainError("speed bound must be nonnegative");
}

double cfl_timestep(const RunConfig& config, const Grid& grid, double N) {
  if (!(N >= 0.0)) throw DomainError("speed bound must be nonnegative");
  const double h = grid.dx_min();
  const double d2 = 2.0 * grid.dim();
  return config.cfl * std::min(h / (d2 * std::max(N, 1e-12)), h * h / (d2 * config.eps));
}

double grid_speed_bound(const RunConfig& config, const Grid& grid) {
  const Box& box = grid.box();
  const int d = grid.dim();
  Point c{0.0, 0.0};
  double half_diag = 0.0;
  for (int k = 0; k < d; ++k) {
    c[k] = 0.5 * (box.lo[k] + box.hi[k]);
    half_diag += 0.25 * (box.hi[k] - box.lo[k]) * (box.hi[k] - box.lo[k]);
  }
  half_diag = std::sqrt(half_diag);
  if (const auto* model = std::get_if<PiecewiseFlux>(&config.flux)) {
    SampleGrid sg;
    sg.center = c;
    sg.x_samples = d == 1 ? 65 : 33;
    const double M = std::max(std::abs(model->lower()), std::abs(model->upper()));
    return speed_bound(*model, half_diag, M, sg).value;
  }
  const auto& g = std::get<GeneralBVFlux>(config.flux);
  double best = 0.0;
  for (unsigned i = 1; i <= 256; ++i) {
    Point x{0.0, 0.0};
    for (int k = 0; k < d; ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * halton(i, k == 0 ? 2 : 3);
    for (int q = 0; q <= 200; ++q) {
      const double l = g.a + (g.b - g.a) * q / 200.0;
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double v = g.d_lambda(k, x, l);
        s += v * v;
      }
      best = std::max(best, s);
    }
  }
  return std::sqrt(best);
}

std::shared_ptr<const FluxField> make_flux_field(const RunConfig& config) {
  if (const auto* model = std::get_if<PiecewiseFlux>(&config.flux)) {
    if (config.mode == FluxMode::Smoothed)
      return std::make_shared<SmoothedFlux>(*model, config.smoothing_width.value_or(config.eps));
    return std::make_shared<MollifiedFlux>(mollify_flux(GeneralBVFlux::from_piecewise(*model),
                                                        config.smoothing_width.value_or(config.eps)));
  }
  return std::make_shared<MollifiedFlux>(
      mollify_flux(std::get<GeneralBVFlux>(config.flux), config.smoothing_width.value_or(config.eps)));
}

// ---------------------------------------------------------------------------
// Stepping

Stepper::Stepper(const RunConfig& config, const Grid& grid, const Field& u0)
    : config_(config), grid_(grid) {
  config_.validate();
  if (config_.dim() != grid.dim()) throw DomainError("flux and grid dimensions differ");
  if (u0.grid != grid) throw DomainError("initial field lives on a different grid");
  flux_ = make_flux_field(config_);
  N_ = config_.speed ? *config_.speed : grid_speed_bound(config_, grid_);
  dt_max_ = cfl_timestep(config_, grid_, N_);
  const int d = grid.dim();
  for (int k = 0; k < d; ++k) {
    const int other = d == 2 ? grid.cells(1 - k) : 1;
    ghost_lo_[k].assign(other, config_.boundary.value);
    ghost_hi_[k].assign(other, config_.boundary.value);
    if (config_.boundary.kind == Boundary::Kind::InitialTrace) {
      for (int m = 0; m < other; ++m) {
        const int last = grid.cells(k) - 1;
        const std::size_t lo = d == 1 ? 0 : (k == 0 ? grid.index(0, m) : grid.index(m, 0));
        const std::size_t hi = d == 1 ? last : (k == 0 ? grid.index(last, m) : grid.index(m, last));
        ghost_lo_[k][m] = u0.u[lo];
        ghost_hi_[k][m] = u0.u[hi];
      }
    }
  }
}

void Stepper::step(Field& u, double dt) const {
  if (!(dt > 0.0)) throw SolverError("time step must be positive");
  if (dt > dt_max_ * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time step " << dt << " exceeds the CFL bound " << dt_max_ << " (N = " << N_ << ")";
    throw SolverError(os.str());
  }
  const int d = grid_.dim();
  const double eps = config_.eps;
  const double alpha_cap = N_ * (1.0 + 1e-6) + 1e-12;
  next_ = u.u;
  for (int k = 0; k < d; ++k) {
    const int n = grid_.cells(k);
    const int other = d == 2 ? grid_.cells(1 - k) : 1;
    const double h = grid_.dx(k);
    const double lo = grid_.box().lo[k];
    const double ratio = dt / h;
    flux_buf_.resize(n + 1);
    for (int m = 0; m < other; ++m) {
      auto cell = [&](int i) -> std::size_t {
        if (d == 1) return i;
        return k == 0 ? grid_.index(i, m) : grid_.index(m, i);
      };
      auto state = [&](int i) {
        if (i < 0) return ghost_lo_[k][m];
        if (i >= n) return ghost_hi_[k][m];
        return u.u[cell(i)];
      };
      Point x{0.0, 0.0};
      if (d == 2) x[1 - k] = grid_.box().lo[1 - k] + (m + 0.5) * grid_.dx(1 - k);
      for (int f = 0; f <= n; ++f) {
        const double ul = state(f - 1), ur = state(f);
        x[k] = lo + f * h;
        double fl, fr, alpha;
        flux_->face_data(k, x, ul, ur, fl, fr, alpha);
        if (alpha > alpha_cap) {
          std::ostringstream os;
          os << "local wave speed " << alpha << " exceeds the speed bound " << N_ << " at x = (" << x[0];
          if (d == 2) os << ", " << x[1];
          os << ") with states " << ul << ", " << ur;
          throw SolverError(os.str());
        }
        flux_buf_[f] = 0.5 * (fl + fr) - 0.5 * alpha * (ur - ul) - eps * (ur - ul) / h;
      }
      for (int i = 0; i < n; ++i) next_[cell(i)] -= ratio * (flux_buf_[i + 1] - flux_buf_[i]);
    }
  }
  for (std::size_t i = 0; i < next_.size(); ++i) {
    if (!std::isfinite(next_[i])) {
      std::ostringstream os;
      os << "non-finite value at t = " << u.t + dt << " in cell " << i;
      throw SolverError(os.str());
    }
  }
  u.u.swap(next_);
  u.t += dt;
}

Field step(const Field& u, const RunConfig& config, double dt) {
  Stepper s(config, u.grid, u);
  Field out = u;
  s.step(out, dt);
  return out;
}

// ---------------------------------------------------------------------------
// Runs

json grid_to_json(const Grid& g) {
  json lo = json::array(), hi = json::array(), n = json::array();
  for (int k = 0; k < g.dim(); ++k) {
    lo.push_back(g.box().lo[k]);
    hi.push_back(g.box().hi[k]);
    n.push_back(g.cells(k));
  }
  return {{"lo", lo}, {"hi", hi}, {"cells", n}};
}

json boundary_to_json(const Boundary& b) {
  if (b.kind == Boundary::Kind::InitialTrace) return {{"kind", "initial_trace"}};
  return {{"kind", "constant"}, {"value", b.value}};
}

json RunManifest::to_json() const {
  json cfg = {{"eps", config.eps},
              {"T", config.T},
              {"cfl", config.cfl},
              {"mode", config.mode == FluxMode::Smoothed ? "smoothed" : "mollified"},
              {"boundary", boundary_to_json(config.boundary)},
              {"output_times", config.output_times},
              {"a", config.lower()},
              {"b", config.upper()},
              {"d", config.dim()}};
  if (config.smoothing_width) cfg["smoothing_width"] = *config.smoothing_width;
  if (const auto* m = std::get_if<PiecewiseFlux>(&config.flux)) cfg["flux"] = m->name();
  else cfg["flux"] = "general";
  return {{"config", cfg},  {"grid", grid_to_json(grid)}, {"N", N},
          {"dt_cfl", dt_cfl}, {"steps", steps},           {"dt_min", dt_min},
          {"dt_max", dt_max}, {"wall_seconds", wall_seconds}};
}

RunResult run(const Field& u0, const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const double a = config.lower(), b = config.upper();
  for (std::size_t i = 0; i < u0.u.size(); ++i)
    if (!(u0.u[i] >= a && u0.u[i] <= b)) {
      std::ostringstream os;
      os << "initial value " << u0.u[i] << " in cell " << i << " outside [" << a << ", " << b << "]";
      throw DomainError(os.str());
    }
  Stepper stepper(config, u0.grid, u0);

  std::vector<double> times = config.output_times;
  times.push_back(config.T);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  RunResult res{{}, RunManifest{config, u0.grid}};
  res.manifest.N = stepper.N();
  res.manifest.dt_cfl = stepper.max_dt();
  res.manifest.dt_min = std::numeric_limits<double>::infinity();
  Field u = u0;
  u.t = 0.0;
  res.frames.push_back(u);
  const double dtm = stepper.max_dt();
  for (double target : times) {
    while (u.t < target) {
      double dt = target - u.t;
      bool last = true;
      if (dt > dtm) {
        // Split the remainder evenly when a single short step would be left over.
        const double k = std::ceil(dt / dtm);
        dt = std::min(dtm, (target - u.t) / k);
        last = k <= 1.0;
      }
      stepper.step(u, dt);
      if (last || target - u.t < 1e-12 * std::max(1.0, target)) u.t = target;
      ++res.manifest.steps;
      res.manifest.dt_min = std::min(res.manifest.dt_min, dt);
      res.manifest.dt_max = std::max(res.manifest.dt_max, dt);
    }
    res.frames.push_back(u);
  }
  if (res.manifest.steps == 0) res.manifest.dt_min = 0.0;
  res.manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

MaxPrincipleReport max_principle_check(const Trajectory& frames, double a, double b) {
  MaxPrincipleReport rep;
  rep.min_value = std::numeric_limits<double>::infinity();
  rep.max_value = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t i = 0; i < frames[f].u.size(); ++i) {
      const double v = frames[f].u[i];
      rep.min_value = std::min(rep.min_value, v);
      rep.max_value = std::max(rep.max_value, v);
      const double excess = std::max(a - v, v - b);
      if (excess > worst) {
        worst = excess;
        rep.frame = f;
        rep.cell = i;
        rep.witness_value = v;
      }
    }
  }
  rep.pass = rep.min_value >= a - 1e-10 && rep.max_value <= b + 1e-10;
  return rep;
}

// ---------------------------------------------------------------------------
// CSV

void write_field_csv(const std::string& path, const Trajectory& frames) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot write " + path);
  const int d = frames.empty() ? 1 : frames.front().grid.dim();
  std::fputs(d == 1 ? "t,x1,u\n" : "t,x1,x2,u\n", fp);
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
      const Point x = f.grid.center(i);
      if (d == 1)
        std::fprintf(fp, "%.17g,%.17g,%.17g\n", f.t, x[0], f.u[i]);
      else
        std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", f.t, x[0], x[1], f.u[i]);
    }
  }
  std::fclose(fp);
}

Trajectory read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(in, line);
  int d;
  if (line == "t,x1,u")
    d = 1;
  else if (line == "t,x1,x2,u")
    d = 2;
  else
    throw std::runtime_error(path + ": unexpected header \"" + line + "\"");
  struct Row {
    double t;
    Point x;
    double u;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    Row r{0.0, {0.0, 0.0}, 0.0};
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != d + 2)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": wrong column count");
    r.t = vals[0];
    for (int k = 0; k < d; ++k) r.x[k] = vals[1 + k];
    r.u = vals[d + 1];
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error(path + ": no rows");
  // Frames are contiguous blocks of equal t.
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  std::size_t s = 0;
  for (std::size_t i = 1; i <= rows.size(); ++i)
    if (i == rows.size() || rows[i].t != rows[s].t) {
      blocks.push_back({s, i});
      s = i;
    }
  const auto [b0, e0] = blocks.front();
  Box box;
  box.d = d;
  std::array<int, kMaxDim> n{1, 1};
  for (int k = 0; k < d; ++k) {
    std::vector<double> xs;
    for (std::size_t i = b0; i < e0; ++i) xs.push_back(rows[i].x[k]);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    if (xs.size() < 2) throw std::runtime_error(path + ": fewer than two cells along an axis");
    n[k] = static_cast<int>(xs.size());
    const double h = (xs.back() - xs.front()) / (n[k] - 1);
    box.lo[k] = xs.front() - 0.5 * h;
    box.hi[k] = xs.back() + 0.5 * h;
  }
  Grid g(box, n);
  Trajectory out;
  for (const auto& [b, e] : blocks) {
    if (e - b != g.size()) throw std::runtime_error(path + ": frames differ in cell count");
    Field f(g, 0.0, rows[b].t);
    for (std::size_t i = b; i < e; ++i) f.u[i - b] = rows[i].u;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace dflux
