#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dflux/entropy.hpp"
#include "dflux/germ.hpp"
#include "dflux/presets.hpp"

namespace dflux {

/// Schema violation; what() starts with the JSON pointer of the offending field.
class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Initial datum description; see README for the kinds.
struct InitialSpec {
  nlohmann::json canonical;
  /// Evaluates the datum; random kinds draw from seed.
  std::function<double(const Point&)> build(unsigned seed) const;
};

struct ChartSpec {
  Point center{0.0, 0.0};
  double r = 0.0;
  double R = 0.0;
  int cells = 128;
};

struct EntropySpec {
  std::string kind = "kruzhkov";
  double tol_factor = 1e-3;
  int bumps = 20;
  std::optional<Box> box;
};

struct KatoSpec {
  double tol_factor = 1e-2;
  int bumps = 20;
  double eta = 0.05;
};

struct ConeSpec {
  Point center{0.0, 0.0};
  double R = 0.5;
  std::optional<double> N;
  double tol = 1e-2;
};

struct ConvergeSpec {
  std::vector<double> epsilons;
  std::vector<int> comparison_cells;
};

struct GermSpec {
  int level = 1;
  Box data_box{};
  std::optional<double> far_field;
  std::vector<double> epsilons;
  std::vector<int> comparison_cells;
  std::optional<double> threshold;
  std::optional<InitialSpec> probe;
  std::optional<int> probe_level;
};

struct Scenario {
  std::string name;
  std::string study = "run";
  nlohmann::json flux;  // canonical flux block
  PiecewiseFlux model = make_preset("burgers");
  Grid grid;
  double eps = 1e-2;
  double T = 0.5;
  double cfl = 0.45;
  FluxMode mode = FluxMode::Smoothed;
  std::optional<double> smoothing_width;
  Boundary boundary = Boundary::initial_trace();
  int frames = 10;
  InitialSpec initial;
  std::optional<InitialSpec> second_initial;
  std::vector<ChartSpec> charts;
  std::optional<EntropySpec> entropy;
  std::optional<KatoSpec> kato;
  std::optional<ConeSpec> cone;
  std::optional<ConvergeSpec> converge;
  std::optional<GermSpec> germ;

  RunConfig run_config() const;
  /// Every field spelled out, defaults included.
  nlohmann::json to_json() const;
};

const std::vector<std::string>& study_kinds();

Scenario parse_scenario(const nlohmann::json& j);
/// Reads and parses a file; malformed JSON is reported as a ScenarioError.
Scenario parse_scenario_file(const std::string& path);

struct ExecOptions {
  std::string out_dir = "out";
  unsigned seed = 0;
  std::optional<double> tol;
  std::size_t cell_budget = 65536;
  bool quiet = false;
};

struct ExecResult {
  /// 0 all checks pass, 2 a check failed, 1 runtime error.
  int status = 0;
  nlohmann::json report;
};

/// Runs scenario.study and writes artifacts plus report.json into options.out_dir.
ExecResult execute(const Scenario& scenario, const ExecOptions& options);

struct DiffReport {
  double l1 = 0.0;
  double max_abs = 0.0;
  std::size_t cells = 0;
  nlohmann::json to_json() const;
};

/// Compares the last frames of two field CSV files. A finer grid that refines the
/// other is block-averaged onto it first; other shape mismatches throw DomainError.
DiffReport diff_fields(const std::string& path_a, const std::string& path_b);

}  // namespace dflux
