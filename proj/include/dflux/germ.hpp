#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dflux/solver.hpp"

namespace dflux {

/// A dyadic step function: 2^level cells per axis on the data box, value
/// a + digit (b - a) / 2^level on each cell, far_field outside the box.
struct FamilyMember {
  int level = 0;
  std::vector<int> digits;
  std::string id;
  Box data_box{};
  double a = 0.0, b = 1.0, far_field = 0.0;

  double operator()(const Point& x) const;
  Field sample(const Grid& g) const { return Field::sample(g, *this); }
};

class DenseFamily {
 public:
  DenseFamily(int level, double a, double b, const Box& data_box, std::optional<double> far_field = {});

  int level() const { return level_; }
  double lower() const { return a_; }
  double upper() const { return b_; }
  const Box& data_box() const { return box_; }
  double far_field() const { return far_; }
  int cells_per_axis() const { return 1 << level_; }
  int cell_count() const;
  int value_count() const { return (1 << level_) + 1; }
  double value(int digit) const;

  /// Number of members; throws ResourceError if it does not fit in 64 bits.
  std::uint64_t size() const;
  /// Members in lexicographic digit order, first cell slowest.
  FamilyMember member(std::uint64_t index) const;
  FamilyMember member_from_digits(std::vector<int> digits) const;
  std::vector<FamilyMember> members() const;
  std::optional<std::uint64_t> index_of(const FamilyMember& m) const;

  /// Cellwise L1-best member for data given on a grid that resolves the dyadic cells.
  FamilyMember nearest(const Field& u0) const;

 private:
  int level_;
  double a_, b_, far_;
  Box box_;
};

/// The same function one level finer.
FamilyMember refine(const FamilyMember& m);

/// Runs of one datum along the epsilon sequence.
struct GermEntry {
  std::string id;
  Field initial;                 // on the comparison grid
  std::vector<double> epsilons;  // strictly decreasing
  std::vector<int> fine_cells;   // cells per axis of each run
  std::vector<Field> endpoints;  // u_eps(T) on the comparison grid
  std::vector<double> deltas;    // l1(endpoints[k+1], endpoints[k])
  std::vector<RunManifest> manifests;
  double delta_tail = 0.0;

  const Field& limit() const { return endpoints.back(); }
};

/// delta_last * rho / (1 - rho) with rho = delta_last / delta_prev; infinite if rho >= 1.
double geometric_tail(const std::vector<double>& deltas);

/// Every delta after the first is either below its predecessor or zero.
bool tail_decreasing(const std::vector<double>& deltas);

/// Cells along an axis of this length: the smallest multiple of comparison_cells with dx <= eps / 4.
int cells_for_epsilon(double length, int comparison_cells, double eps);

/// Solves from u0 for each eps_k on a grid slaved to eps_k and records the endpoints.
/// Throws ResourceError if a grid exceeds cell_budget cells.
GermEntry run_sequence(const std::string& id, const std::function<double(const Point&)>& u0,
                       const std::vector<double>& epsilons, const RunConfig& base, const Grid& comparison,
                       std::size_t cell_budget);

struct SelectionReport {
  bool success = false;
  double threshold = 0.0;
  std::vector<std::size_t> indices;
  /// The datum that stopped the selection or broke monotonicity.
  std::string failing_datum;
  std::string reason;

  nlohmann::json to_json() const;
};

/// 0.05 (b - a) |domain|.
double default_threshold(double a, double b, const Box& domain);

/// Picks k_0 < k_1 < ... with max over entries of delta_k <= threshold 2^-j at step j.
/// Succeeds with at least two picks and every entry's deltas non-increasing from k_0 on.
SelectionReport diagonal_select(const std::vector<const GermEntry*>& entries, double threshold);

struct ContractionMatrix {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> data;
  std::vector<std::vector<double>> limit;
  std::vector<std::vector<double>> ratio;  // NaN where the data coincide
};

ContractionMatrix contraction_matrix(const std::vector<const GermEntry*>& entries);

struct StabilityReport {
  bool pass = true;
  double eta = 0.05;
  double worst_ratio = 0.0;
  std::string worst_i, worst_j;
  std::size_t pairs = 0;

  nlohmann::json to_json() const;
};

StabilityReport stability_report(const ContractionMatrix& m, double eta = 0.05);

/// Solver setup shared by every run of a germ study, plus the runs done so far.
struct GermStudy {
  explicit GermStudy(RunConfig cfg) : base(std::move(cfg)) {}

  RunConfig base;
  std::vector<double> epsilons;
  Grid comparison;
  std::size_t cell_budget = 65536;
  std::map<std::string, GermEntry> cache;

  const GermEntry& entry(const FamilyMember& m);
};

struct GermEstimate {
  std::string member_id;
  int level = 0;
  bool reused = false;
  double data_distance = 0.0;
  double delta_tail = 0.0;
  double error_bar = 0.0;
  bool meets_target = true;
  Field limit;

  nlohmann::json to_json() const;
};

/// Limit estimate for u0 (on the comparison grid) through its nearest family member.
GermEstimate germ_solve(const Field& u0, const DenseFamily& family, GermStudy& study,
                        std::optional<double> target_error = {});

struct GermRecord {
  int level = 0;
  std::vector<double> epsilons;
  Grid comparison;
  std::vector<GermEntry> entries;
  SelectionReport selection;
  ContractionMatrix matrix;
  StabilityReport stability;

  nlohmann::json manifest() const;
};

/// Runs every member of the family and assembles selection and stability reports.
GermRecord build_record(const DenseFamily& family, GermStudy& study, double threshold);

/// manifest.json, endpoints/<id>_k<k>.csv, contraction_{data,limit,ratio}.csv in dir.
void write_record(const GermRecord& record, const std::string& dir, const nlohmann::json& extra = {});

void write_matrix_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<std::vector<double>>& values);

}  // namespace dflux
