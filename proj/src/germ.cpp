#include "dflux/germ.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "dflux/entropy.hpp"

namespace dflux {

using nlohmann::json;

namespace {

std::string member_id(int level, const std::vector<int>& digits) {
  std::string s = "L" + std::to_string(level);
  for (int d : digits) s += "_" + std::to_string(d);
  return s;
}

int dyadic_cell(double x, double lo, double hi, int n) {
  const int c = static_cast<int>(std::floor((x - lo) / (hi - lo) * n));
  return std::clamp(c, 0, n - 1);
}

}  // namespace

double FamilyMember::operator()(const Point& x) const {
  const int d = data_box.d;
  for (int k = 0; k < d; ++k)
    if (x[k] < data_box.lo[k] || x[k] > data_box.hi[k]) return far_field;
  const int n = 1 << level;
  std::size_t idx = dyadic_cell(x[0], data_box.lo[0], data_box.hi[0], n);
  if (d == 2) idx = idx * n + dyadic_cell(x[1], data_box.lo[1], data_box.hi[1], n);
  return a + digits[idx] * (b - a) / n;
}

DenseFamily::DenseFamily(int level, double a, double b, const Box& data_box, std::optional<double> far_field)
    : level_(level), a_(a), b_(b), far_(far_field.value_or(a)), box_(data_box) {
  if (level < 0 || level > 12) throw std::invalid_argument("family level must be in [0, 12]");
  if (!(a < b)) throw std::invalid_argument("family needs a < b");
  if (far_ < a || far_ > b) throw std::invalid_argument("far field must lie in [a, b]");
  for (int k = 0; k < box_.d; ++k)
    if (!(box_.lo[k] < box_.hi[k])) throw std::invalid_argument("empty data box");
}

int DenseFamily::cell_count() const { return box_.d == 1 ? (1 << level_) : (1 << level_) * (1 << level_); }

double DenseFamily::value(int digit) const { return a_ + digit * (b_ - a_) / (1 << level_); }

std::uint64_t DenseFamily::size() const {
  const double logs = cell_count() * std::log2(static_cast<double>(value_count()));
  if (logs >= 63.0) throw ResourceError("family level " + std::to_string(level_) + " has more than 2^63 members");
  std::uint64_t s = 1;
  for (int i = 0; i < cell_count(); ++i) s *= static_cast<std::uint64_t>(value_count());
  return s;
}

FamilyMember DenseFamily::member_from_digits(std::vector<int> digits) const {
  if (static_cast<int>(digits.size()) != cell_count()) throw std::invalid_argument("wrong number of digits");
  for (int v : digits)
    if (v < 0 || v >= value_count()) throw std::invalid_argument("digit out of range");
  FamilyMember m;
  m.level = level_;
  m.id = member_id(level_, digits);
  m.digits = std::move(digits);
  m.data_box = box_;
  m.a = a_;
  m.b = b_;
  m.far_field = far_;
  return m;
}

FamilyMember DenseFamily::member(std::uint64_t index) const {
  if (index >= size()) throw std::out_of_range("family member index out of range");
  std::vector<int> digits(cell_count());
  for (int i = cell_count() - 1; i >= 0; --i) {
    digits[i] = static_cast<int>(index % value_count());
    index /= value_count();
  }
  return member_from_digits(std::move(digits));
}

std::vector<FamilyMember> DenseFamily::members() const {
  const std::uint64_t n = size();
  std::vector<FamilyMember> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(member(i));
  return out;
}

std::optional<std::uint64_t> DenseFamily::index_of(const FamilyMember& m) const {
  if (m.level != level_ || static_cast<int>(m.digits.size()) != cell_count() || m.a != a_ || m.b != b_ ||
      m.far_field != far_)
    return std::nullopt;
  std::uint64_t idx = 0;
  for (int v : m.digits) {
    if (v < 0 || v >= value_count()) return std::nullopt;
    idx = idx * value_count() + v;
  }
  return idx;
}

FamilyMember DenseFamily::nearest(const Field& u0) const {
  const Grid& g = u0.grid;
  if (g.dim() != box_.d) throw DomainError("data and family dimensions differ");
  const int n = cells_per_axis();
  // Per dyadic cell, the values of u0 at grid cells inside it.
  std::vector<std::vector<double>> inside(cell_count());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.center(i);
    if (!box_.contains(x)) continue;
    std::size_t c = dyadic_cell(x[0], box_.lo[0], box_.hi[0], n);
    if (box_.d == 2) c = c * n + dyadic_cell(x[1], box_.lo[1], box_.hi[1], n);
    inside[c].push_back(u0.u[i]);
  }
  std::vector<int> digits(cell_count(), 0);
  for (int c = 0; c < cell_count(); ++c) {
    if (inside[c].empty()) throw DomainError("grid does not resolve the dyadic cells of the family");
    double best = std::numeric_limits<double>::infinity();
    for (int v = 0; v < value_count(); ++v) {
      double e = 0.0;
      for (double u : inside[c]) e += std::abs(u - value(v));
      if (e < best) {
        best = e;
        digits[c] = v;
      }
    }
  }
  return member_from_digits(std::move(digits));
}

FamilyMember refine(const FamilyMember& m) {
  const int n = 1 << m.level;
  FamilyMember r = m;
  r.level = m.level + 1;
  if (m.data_box.d == 1) {
    r.digits.assign(2 * n, 0);
    for (int i = 0; i < 2 * n; ++i) r.digits[i] = 2 * m.digits[i / 2];
  } else {
    r.digits.assign(4 * n * n, 0);
    for (int i = 0; i < 2 * n; ++i)
      for (int k = 0; k < 2 * n; ++k) r.digits[i * 2 * n + k] = 2 * m.digits[(i / 2) * n + k / 2];
  }
  r.id = member_id(r.level, r.digits);
  return r;
}

// ---------------------------------------------------------------------------
// Sequences

double geometric_tail(const std::vector<double>& deltas) {
  if (deltas.empty()) return 0.0;
  const double last = deltas.back();
  if (last == 0.0) return 0.0;
  if (deltas.size() < 2) return std::numeric_limits<double>::infinity();
  const double rho = last / deltas[deltas.size() - 2];
  if (!(rho < 1.0)) return std::numeric_limits<double>::infinity();
  return last * rho / (1.0 - rho);
}

bool tail_decreasing(const std::vector<double>& deltas) {
  for (std::size_t k = 1; k < deltas.size(); ++k)
    if (!(deltas[k] < deltas[k - 1] || (deltas[k] == 0.0 && deltas[k - 1] == 0.0))) return false;
  return true;
}

int cells_for_epsilon(double length, int comparison_cells, double eps) {
  if (!(eps > 0.0)) throw DomainError("epsilon must be positive");
  const double minimal = std::ceil(length / (eps / 4.0) - 1e-9);
  const double blocks = std::ceil(minimal / comparison_cells);
  return static_cast<int>(std::max(1.0, blocks)) * comparison_cells;
}

GermEntry run_sequence(const std::string& id, const std::function<double(const Point&)>& u0,
                       const std::vector<double>& epsilons, const RunConfig& base, const Grid& comparison,
                       std::size_t cell_budget) {
  if (epsilons.empty()) throw std::invalid_argument("empty epsilon sequence");
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!(epsilons[k] > 0.0)) throw std::invalid_argument("epsilon sequence must be positive");
    if (k > 0 && !(epsilons[k] < epsilons[k - 1]))
      throw std::invalid_argument("epsilon sequence must be strictly decreasing");
  }
  const Box& box = comparison.box();
  const int d = comparison.dim();
  // Check every grid against the budget before running anything.
  std::vector<std::array<int, kMaxDim>> counts;
  for (double eps : epsilons) {
    std::array<int, kMaxDim> n{1, 1};
    double cells = 1.0;
    for (int k = 0; k < d; ++k) {
      n[k] = cells_for_epsilon(box.hi[k] - box.lo[k], comparison.cells(k), eps);
      cells *= n[k];
    }
    if (cells > static_cast<double>(cell_budget)) {
      std::ostringstream os;
      os << "eps = " << eps << " needs " << cells << " cells, above the budget of " << cell_budget;
      throw ResourceError(os.str());
    }
    counts.push_back(n);
  }

  GermEntry e;
  e.id = id;
  e.epsilons = epsilons;
  e.initial = Field::sample(comparison, u0);
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    RunConfig cfg = base;
    cfg.eps = epsilons[k];
    cfg.output_times = {cfg.T};
    const Grid g(box, counts[k]);
    RunResult r = run(Field::sample(g, u0), cfg);
    e.endpoints.push_back(r.frames.back().block_average(comparison));
    e.fine_cells.push_back(counts[k][0]);
    e.manifests.push_back(std::move(r.manifest));
    if (k > 0) e.deltas.push_back(l1_distance(e.endpoints[k], e.endpoints[k - 1]));
  }
  e.delta_tail = geometric_tail(e.deltas);
  return e;
}

// ---------------------------------------------------------------------------
// Selection and stability

json SelectionReport::to_json() const {
  return {{"success", success},
          {"threshold", threshold},
          {"indices", indices},
          {"failing_datum", failing_datum},
          {"reason", reason}};
}

double default_threshold(double a, double b, const Box& domain) { return 0.05 * (b - a) * domain.volume(); }

SelectionReport diagonal_select(const std::vector<const GermEntry*>& entries, double threshold) {
  SelectionReport rep;
  rep.threshold = threshold;
  if (entries.empty()) {
    rep.reason = "no records";
    return rep;
  }
  std::size_t nd = std::numeric_limits<std::size_t>::max();
  for (const GermEntry* e : entries) {
    if (e->epsilons.size() < 4) {
      rep.failing_datum = e->id;
      rep.reason = "fewer than 4 epsilon values";
      return rep;
    }
    nd = std::min(nd, e->deltas.size());
  }
  std::size_t k = 0;
  for (int j = 0; k < nd; ++j) {
    const double bound = threshold * std::ldexp(1.0, -j);
    bool found = false;
    std::string blocker;
    for (; k < nd; ++k) {
      blocker.clear();
      for (const GermEntry* e : entries)
        if (e->deltas[k] > bound) {
          blocker = e->id;
          break;
        }
      if (blocker.empty()) {
        found = true;
        break;
      }
    }
    if (!found) {
      if (rep.failing_datum.empty()) {
        rep.failing_datum = blocker;
        rep.reason = "step " + std::to_string(j) + ": delta above threshold 2^-" + std::to_string(j);
      }
      break;
    }
    rep.indices.push_back(k);
    ++k;
  }
  if (rep.indices.size() < 2) {
    if (rep.reason.empty()) rep.reason = "fewer than two indices selected";
    return rep;
  }
  for (const GermEntry* e : entries)
    for (std::size_t m = rep.indices.front() + 1; m < e->deltas.size(); ++m)
      if (e->deltas[m] > e->deltas[m - 1]) {
        rep.failing_datum = e->id;
        rep.reason = "deltas increase after the first selected index";
        return rep;
      }
  rep.success = true;
  rep.failing_datum.clear();
  rep.reason.clear();
  return rep;
}

ContractionMatrix contraction_matrix(const std::vector<const GermEntry*>& entries) {
  ContractionMatrix m;
  const std::size_t n = entries.size();
  m.data.assign(n, std::vector<double>(n, 0.0));
  m.limit.assign(n, std::vector<double>(n, 0.0));
  m.ratio.assign(n, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  for (const GermEntry* e : entries) m.ids.push_back(e->id);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dd = l1_distance(entries[i]->initial, entries[j]->initial);
      const double dl = l1_distance(entries[i]->limit(), entries[j]->limit());
      m.data[i][j] = m.data[j][i] = dd;
      m.limit[i][j] = m.limit[j][i] = dl;
      if (dd > 0.0) m.ratio[i][j] = m.ratio[j][i] = dl / dd;
      else if (dl > 0.0) m.ratio[i][j] = m.ratio[j][i] = std::numeric_limits<double>::infinity();
    }
  return m;
}

json StabilityReport::to_json() const {
  return {{"pass", pass}, {"eta", eta}, {"worst_ratio", worst_ratio}, {"worst_pair", {worst_i, worst_j}},
          {"pairs", pairs}};
}

StabilityReport stability_report(const ContractionMatrix& m, double eta) {
  StabilityReport rep;
  rep.eta = eta;
  for (std::size_t i = 0; i < m.ids.size(); ++i)
    for (std::size_t j = i + 1; j < m.ids.size(); ++j) {
      const double r = m.ratio[i][j];
      if (std::isnan(r)) continue;
      ++rep.pairs;
      if (r > rep.worst_ratio || rep.worst_i.empty()) {
        rep.worst_ratio = std::max(rep.worst_ratio, r);
        rep.worst_i = m.ids[i];
        rep.worst_j = m.ids[j];
      }
    }
  rep.pass = rep.worst_ratio <= 1.0 + eta;
  return rep;
}

// ---------------------------------------------------------------------------
// Germ solve

const GermEntry& GermStudy::entry(const FamilyMember& m) {
  auto it = cache.find(m.id);
  if (it != cache.end()) return it->second;
  return cache.emplace(m.id, run_sequence(m.id, m, epsilons, base, comparison, cell_budget)).first->second;
}

json GermEstimate::to_json() const {
  return {{"member", member_id},         {"level", level},
          {"reused", reused},            {"data_distance", data_distance},
          {"delta_tail", delta_tail},    {"error_bar", error_bar},
          {"meets_target", meets_target}};
}

GermEstimate germ_solve(const Field& u0, const DenseFamily& family, GermStudy& study,
                        std::optional<double> target_error) {
  if (u0.grid != study.comparison) throw DomainError("germ_solve needs data on the comparison grid");
  for (double v : u0.u)
    if (v < family.lower() || v > family.upper()) throw DomainError("datum leaves [a, b]");
  const FamilyMember m = family.nearest(u0);
  GermEstimate est;
  est.member_id = m.id;
  est.level = family.level();
  est.reused = study.cache.count(m.id) > 0;
  const GermEntry& e = study.entry(m);
  est.data_distance = l1_distance(e.initial, u0);
  est.delta_tail = e.delta_tail;
  est.error_bar = est.data_distance + est.delta_tail;
  est.limit = e.limit();
  if (target_error) est.meets_target = est.error_bar <= *target_error;
  return est;
}

// ---------------------------------------------------------------------------
// Records

json GermRecord::manifest() const {
  json members = json::array();
  for (const auto& e : entries) {
    json runs = json::array();
    for (const auto& m : e.manifests) runs.push_back(m.to_json());
    json files = json::array();
    for (std::size_t k = 0; k < e.endpoints.size(); ++k) files.push_back("endpoints/" + e.id + "_k" + std::to_string(k) + ".csv");
    members.push_back({{"id", e.id},
                       {"fine_cells", e.fine_cells},
                       {"deltas", e.deltas},
                       {"delta_tail", std::isfinite(e.delta_tail) ? json(e.delta_tail) : json(nullptr)},
                       {"endpoints", files},
                       {"runs", runs}});
  }
  return {{"level", level},
          {"epsilons", epsilons},
          {"comparison_grid", grid_to_json(comparison)},
          {"members", members},
          {"selection", selection.to_json()},
          {"stability", stability.to_json()}};
}

GermRecord build_record(const DenseFamily& family, GermStudy& study, double threshold) {
  GermRecord rec;
  rec.level = family.level();
  rec.epsilons = study.epsilons;
  rec.comparison = study.comparison;
  for (const auto& m : family.members()) rec.entries.push_back(study.entry(m));
  std::vector<const GermEntry*> ptrs;
  for (const auto& e : rec.entries) ptrs.push_back(&e);
  rec.selection = diagonal_select(ptrs, threshold);
  rec.matrix = contraction_matrix(ptrs);
  rec.stability = stability_report(rec.matrix);
  return rec;
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<std::vector<double>>& values) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot write " + path);
  std::fputs("id", fp);
  for (const auto& id : ids) std::fprintf(fp, ",%s", id.c_str());
  std::fputc('\n', fp);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::fputs(ids[i].c_str(), fp);
    for (double v : values[i]) std::fprintf(fp, ",%.17g", v);
    std::fputc('\n', fp);
  }
  std::fclose(fp);
}

void write_record(const GermRecord& record, const std::string& dir, const json& extra) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "endpoints");
  for (const auto& e : record.entries)
    for (std::size_t k = 0; k < e.endpoints.size(); ++k)
      write_field_csv((fs::path(dir) / "endpoints" / (e.id + "_k" + std::to_string(k) + ".csv")).string(),
                      {e.endpoints[k]});
  write_matrix_csv((fs::path(dir) / "contraction_data.csv").string(), record.matrix.ids, record.matrix.data);
  write_matrix_csv((fs::path(dir) / "contraction_limit.csv").string(), record.matrix.ids, record.matrix.limit);
  write_matrix_csv((fs::path(dir) / "contraction_ratio.csv").string(), record.matrix.ids, record.matrix.ratio);
  json man = record.manifest();
  if (!extra.is_null()) man["study"] = extra;
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << man.dump(2) << '\n';
}

}  // namespace dflux
