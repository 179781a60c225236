#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dflux/flux.hpp"

namespace dflux {

/// Uniform Cartesian cell grid on a box; cells are stored row-major with the
/// first axis slowest.
class Grid {
 public:
  Grid() = default;
  Grid(const Box& box, std::array<int, kMaxDim> cells);
  static Grid line(double lo, double hi, int n);
  static Grid square(const Box& box, int n);

  int dim() const { return box_.d; }
  const Box& box() const { return box_; }
  int cells(int axis) const { return n_[axis]; }
  const std::array<int, kMaxDim>& counts() const { return n_; }
  double dx(int axis) const { return (box_.hi[axis] - box_.lo[axis]) / n_[axis]; }
  double dx_min() const;
  double cell_volume() const;
  std::size_t size() const;
  std::size_t index(int i, int j = 0) const { return dim() == 1 ? i : static_cast<std::size_t>(i) * n_[1] + j; }
  Point center(std::size_t idx) const;
  /// Multi-index of a flat index.
  std::array<int, kMaxDim> unravel(std::size_t idx) const;

  bool operator==(const Grid& o) const;
  bool operator!=(const Grid& o) const { return !(*this == o); }
  /// True when every axis count of *this is an integer multiple of coarse's on the same box.
  bool refines(const Grid& coarse) const;

 private:
  Box box_{};
  std::array<int, kMaxDim> n_{4, 1};
};

struct Field {
  Grid grid;
  std::vector<double> u;
  double t = 0.0;

  Field() = default;
  Field(Grid g, double value = 0.0, double time = 0.0) : grid(std::move(g)), u(grid.size(), value), t(time) {}
  /// Cell-center samples of f.
  static Field sample(const Grid& g, const std::function<double(const Point&)>& f, double time = 0.0);

  double operator[](std::size_t i) const { return u[i]; }
  double& operator[](std::size_t i) { return u[i]; }
  /// Bilinear interpolation between cell centers, constant beyond the outermost centers.
  double interpolate(const Point& x) const;
  /// Averages blocks of cells onto a coarse grid that this grid refines.
  Field block_average(const Grid& coarse) const;
  double integral() const;
};

using Trajectory = std::vector<Field>;

struct Boundary {
  enum class Kind { Constant, InitialTrace };
  Kind kind = Kind::Constant;
  double value = 0.0;

  static Boundary constant(double v) { return {Kind::Constant, v}; }
  static Boundary initial_trace() { return {Kind::InitialTrace, 0.0}; }
};

enum class FluxMode { Smoothed, Mollified };

struct RunConfig {
  explicit RunConfig(PiecewiseFlux model) : flux(std::move(model)) {}
  explicit RunConfig(GeneralBVFlux general) : flux(std::move(general)) {}

  /// Viscosity, smoothing width and mollification width.
  double eps = 1e-2;
  /// Smoothing width override; empty means eps.
  std::optional<double> smoothing_width;
  double T = 0.5;
  double cfl = 0.45;
  std::variant<PiecewiseFlux, GeneralBVFlux> flux;
  /// Smoothed Heaviside for a PiecewiseFlux; Mollified convolves it in x instead.
  FluxMode mode = FluxMode::Smoothed;
  Boundary boundary{};
  /// Recorded times in (0, T]; empty means {T}. The initial field is always recorded.
  std::vector<double> output_times;
  /// Speed bound for the time step; computed from the flux over the grid when empty.
  std::optional<double> speed;

  int dim() const;
  double lower() const;
  double upper() const;
  void validate() const;
};

/// cfl * min(dx_min / (2 d max(N, 1e-12)), dx_min^2 / (2 d eps)).
double cfl_timestep(const RunConfig& config, const Grid& grid, double N);

/// Stacked derivative bound of the configured flux over the grid box and [a, b].
double grid_speed_bound(const RunConfig& config, const Grid& grid);

/// The smooth flux the solver differentiates for a configuration.
std::shared_ptr<const FluxField> make_flux_field(const RunConfig& config);

/// Reusable explicit stepper for one configuration and grid.
class Stepper {
 public:
  Stepper(const RunConfig& config, const Grid& grid, const Field& u0);

  double N() const { return N_; }
  double max_dt() const { return dt_max_; }
  /// Advances u by dt. Throws SolverError when dt exceeds the CFL bound or the
  /// local Rusanov speed exceeds N.
  void step(Field& u, double dt) const;

 private:
  RunConfig config_;
  Grid grid_;
  std::shared_ptr<const FluxField> flux_;
  double N_ = 0.0;
  double dt_max_ = 0.0;
  // Ghost values beyond the low and high end of each axis, indexed by the other axis.
  std::vector<double> ghost_lo_[kMaxDim];
  std::vector<double> ghost_hi_[kMaxDim];
  mutable std::vector<double> flux_buf_;
  mutable std::vector<double> next_;
};

/// One step; builds a Stepper whose ghost states come from u.
Field step(const Field& u, const RunConfig& config, double dt);

struct RunManifest {
  RunConfig config;
  Grid grid;
  double N = 0.0;
  double dt_cfl = 0.0;
  long steps = 0;
  double dt_min = 0.0;
  double dt_max = 0.0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

struct RunResult {
  Trajectory frames;
  RunManifest manifest;
};

/// Integrates from u0 to T, recording u0 and every output time exactly.
/// Throws DomainError when u0 leaves [a, b] and SolverError on non-finite values.
RunResult run(const Field& u0, const RunConfig& config);

struct MaxPrincipleReport {
  bool pass = true;
  double min_value = 0.0;
  double max_value = 0.0;
  std::size_t frame = 0;
  std::size_t cell = 0;
  double witness_value = 0.0;
};

MaxPrincipleReport max_principle_check(const Trajectory& frames, double a, double b);

/// "t,x1[,x2],u" with one row per cell per frame, %.17g.
void write_field_csv(const std::string& path, const Trajectory& frames);
Trajectory read_field_csv(const std::string& path);

nlohmann::json grid_to_json(const Grid& g);
nlohmann::json boundary_to_json(const Boundary& b);

}  // namespace dflux
