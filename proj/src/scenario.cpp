#include "dflux/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace dflux {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Schema helpers

namespace {

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
  throw ScenarioError((pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

void check_keys(const json& j, const std::string& p, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(p, "expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(p + "/" + key, "unknown key \"" + key + "\"");
}

const json& require(const json& j, const std::string& p, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) fail(p + "/" + key, "missing required key");
  return *it;
}

double number(const json& j, const std::string& p) {
  if (!j.is_number()) fail(p, "expected a number");
  return j.get<double>();
}

double number_or(const json& j, const std::string& p, const std::string& key, double fallback) {
  return j.contains(key) ? number(j[key], p + "/" + key) : fallback;
}

double positive(const json& j, const std::string& p) {
  const double v = number(j, p);
  if (!(v > 0.0)) fail(p, "must be positive");
  return v;
}

int integer(const json& j, const std::string& p, int lo, int hi) {
  if (!j.is_number_integer()) fail(p, "expected an integer");
  const long long v = j.get<long long>();
  if (v < lo || v > hi) fail(p, "expected an integer in " + std::to_string(lo) + ".." + std::to_string(hi));
  return static_cast<int>(v);
}

std::string string_of(const json& j, const std::string& p, const std::set<std::string>& allowed) {
  if (!j.is_string()) fail(p, "expected a string");
  const auto s = j.get<std::string>();
  if (!allowed.count(s)) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(p, "unknown value \"" + s + "\" (expected one of " + list + ")");
  }
  return s;
}

std::vector<double> numbers(const json& j, const std::string& p, std::size_t count = 0) {
  if (!j.is_array()) fail(p, "expected an array of numbers");
  if (count && j.size() != count) fail(p, "expected " + std::to_string(count) + " numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], p + "/" + std::to_string(i)));
  return v;
}

Point point_of(const json& j, const std::string& p, int d) {
  const auto v = numbers(j, p, d);
  Point x{0.0, 0.0};
  for (int k = 0; k < d; ++k) x[k] = v[k];
  return x;
}

json point_json(const Point& x, int d) { return std::vector<double>(x.begin(), x.begin() + d); }

Box box_of(const json& j, const std::string& p, int d) {
  check_keys(j, p, {"lo", "hi"});
  Box b;
  b.d = d;
  b.lo = point_of(require(j, p, "lo"), p + "/lo", d);
  b.hi = point_of(require(j, p, "hi"), p + "/hi", d);
  for (int k = 0; k < d; ++k)
    if (!(b.lo[k] < b.hi[k])) fail(p + "/hi", "each hi must exceed lo");
  return b;
}

json box_json(const Box& b) { return {{"lo", point_json(b.lo, b.d)}, {"hi", point_json(b.hi, b.d)}}; }

std::vector<int> cells_of(const json& j, const std::string& p, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) fail(p, "expected " + std::to_string(d) + " cell counts");
  std::vector<int> v;
  for (int k = 0; k < d; ++k) v.push_back(integer(j[k], p + "/" + std::to_string(k), 1, 1 << 20));
  return v;
}

std::vector<double> epsilon_list(const json& j, const std::string& p, std::size_t min_count) {
  const auto v = numbers(j, p);
  if (v.size() < min_count) fail(p, "expected at least " + std::to_string(min_count) + " values");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) fail(p + "/" + std::to_string(i), "must be positive");
    if (i > 0 && !(v[i] < v[i - 1])) fail(p + "/" + std::to_string(i), "must be strictly decreasing");
  }
  return v;
}

double state(const json& j, const std::string& p, double a, double b) {
  const double v = number(j, p);
  if (v < a || v > b) {
    std::ostringstream os;
    os << "value " << v << " outside [" << a << ", " << b << "]";
    fail(p, os.str());
  }
  return v;
}

int axis_of(const json& j, const std::string& p, int d) {
  return j.contains("axis") ? integer(j["axis"], p + "/axis", 1, d) : 1;
}

// Initial data -------------------------------------------------------------

InitialSpec parse_initial(const json& j, const std::string& p, int d, double a, double b) {
  if (!j.is_object()) fail(p, "expected an object");
  const auto kind = string_of(require(j, p, "kind"), p + "/kind",
                              {"constant", "riemann", "steps", "linear", "bump", "random_steps", "override"});
  json c = {{"kind", kind}};
  if (kind == "constant") {
    check_keys(j, p, {"kind", "value"});
    c["value"] = state(require(j, p, "value"), p + "/value", a, b);
  } else if (kind == "riemann") {
    check_keys(j, p, {"kind", "axis", "x0", "left", "right"});
    c["axis"] = axis_of(j, p, d);
    c["x0"] = number_or(j, p, "x0", 0.0);
    c["left"] = state(require(j, p, "left"), p + "/left", a, b);
    c["right"] = state(require(j, p, "right"), p + "/right", a, b);
  } else if (kind == "steps") {
    check_keys(j, p, {"kind", "axis", "breaks", "values"});
    c["axis"] = axis_of(j, p, d);
    const auto br = numbers(require(j, p, "breaks"), p + "/breaks");
    for (std::size_t i = 1; i < br.size(); ++i)
      if (!(br[i] > br[i - 1])) fail(p + "/breaks/" + std::to_string(i), "breaks must increase");
    const json& vals = require(j, p, "values");
    if (!vals.is_array() || vals.size() != br.size() + 1) fail(p + "/values", "expected one more value than breaks");
    std::vector<double> v;
    for (std::size_t i = 0; i < vals.size(); ++i) v.push_back(state(vals[i], p + "/values/" + std::to_string(i), a, b));
    c["breaks"] = br;
    c["values"] = v;
  } else if (kind == "linear") {
    check_keys(j, p, {"kind", "axis", "lo", "hi", "left", "right", "outside"});
    c["axis"] = axis_of(j, p, d);
    const double lo = number(require(j, p, "lo"), p + "/lo"), hi = number(require(j, p, "hi"), p + "/hi");
    if (!(lo < hi)) fail(p + "/hi", "must exceed lo");
    c["lo"] = lo;
    c["hi"] = hi;
    c["left"] = state(require(j, p, "left"), p + "/left", a, b);
    c["right"] = state(require(j, p, "right"), p + "/right", a, b);
    c["outside"] = state(require(j, p, "outside"), p + "/outside", a, b);
  } else if (kind == "bump") {
    check_keys(j, p, {"kind", "center", "radius", "base", "amplitude"});
    c["center"] = point_json(point_of(require(j, p, "center"), p + "/center", d), d);
    c["radius"] = positive(require(j, p, "radius"), p + "/radius");
    const double base = state(require(j, p, "base"), p + "/base", a, b);
    const double amp = number(require(j, p, "amplitude"), p + "/amplitude");
    if (base + amp < a || base + amp > b) fail(p + "/amplitude", "base + amplitude leaves [a, b]");
    c["base"] = base;
    c["amplitude"] = amp;
  } else if (kind == "random_steps") {
    check_keys(j, p, {"kind", "axis", "lo", "hi", "pieces", "values_lo", "values_hi", "outside"});
    c["axis"] = axis_of(j, p, d);
    const double lo = number(require(j, p, "lo"), p + "/lo"), hi = number(require(j, p, "hi"), p + "/hi");
    if (!(lo < hi)) fail(p + "/hi", "must exceed lo");
    c["lo"] = lo;
    c["hi"] = hi;
    c["pieces"] = j.contains("pieces") ? integer(j["pieces"], p + "/pieces", 1, 4096) : 8;
    const double vlo = j.contains("values_lo") ? state(j["values_lo"], p + "/values_lo", a, b) : a;
    const double vhi = j.contains("values_hi") ? state(j["values_hi"], p + "/values_hi", a, b) : b;
    if (vlo > vhi) fail(p + "/values_hi", "must not be below values_lo");
    c["values_lo"] = vlo;
    c["values_hi"] = vhi;
    c["outside"] = j.contains("outside") ? state(j["outside"], p + "/outside", a, b) : a;
  } else {
    check_keys(j, p, {"kind", "base", "regions", "value"});
    c["base"] = parse_initial(require(j, p, "base"), p + "/base", d, a, b).canonical;
    const json& regs = require(j, p, "regions");
    if (!regs.is_array() || regs.empty()) fail(p + "/regions", "expected a non-empty array of boxes");
    json rs = json::array();
    for (std::size_t i = 0; i < regs.size(); ++i) rs.push_back(box_json(box_of(regs[i], p + "/regions/" + std::to_string(i), d)));
    c["regions"] = rs;
    c["value"] = state(require(j, p, "value"), p + "/value", a, b);
  }
  InitialSpec s;
  s.canonical = c;
  return s;
}

Box box_from_canonical(const json& j, int d) {
  Box b;
  b.d = d;
  for (int k = 0; k < d; ++k) {
    b.lo[k] = j["lo"][k].get<double>();
    b.hi[k] = j["hi"][k].get<double>();
  }
  return b;
}

std::function<double(const Point&)> build_initial(const json& c, unsigned seed) {
  const std::string kind = c["kind"];
  if (kind == "constant") {
    const double v = c["value"];
    return [v](const Point&) { return v; };
  }
  if (kind == "riemann") {
    const int ax = c["axis"].get<int>() - 1;
    const double x0 = c["x0"], l = c["left"], r = c["right"];
    return [=](const Point& x) { return x[ax] < x0 ? l : r; };
  }
  if (kind == "steps") {
    const int ax = c["axis"].get<int>() - 1;
    const auto br = c["breaks"].get<std::vector<double>>();
    const auto v = c["values"].get<std::vector<double>>();
    return [=](const Point& x) {
      return v[std::upper_bound(br.begin(), br.end(), x[ax]) - br.begin()];
    };
  }
  if (kind == "linear") {
    const int ax = c["axis"].get<int>() - 1;
    const double lo = c["lo"], hi = c["hi"], l = c["left"], r = c["right"], out = c["outside"];
    return [=](const Point& x) {
      if (x[ax] < lo || x[ax] > hi) return out;
      return l + (r - l) * (x[ax] - lo) / (hi - lo);
    };
  }
  if (kind == "bump") {
    const auto cv = c["center"].get<std::vector<double>>();
    const int d = static_cast<int>(cv.size());
    Point ctr{0.0, 0.0};
    for (int k = 0; k < d; ++k) ctr[k] = cv[k];
    const double rad = c["radius"], base = c["base"], amp = c["amplitude"];
    return [=](const Point& x) {
      const double s = distance(x, ctr, d) / rad;
      if (s >= 1.0) return base;
      const double q = 1.0 - s * s;
      return base + amp * q * q * q;
    };
  }
  if (kind == "random_steps") {
    const int ax = c["axis"].get<int>() - 1;
    const double lo = c["lo"], hi = c["hi"], out = c["outside"];
    const int n = c["pieces"];
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(c["values_lo"].get<double>(), c["values_hi"].get<double>());
    std::vector<double> v(n);
    for (double& x : v) x = U(rng);
    return [=](const Point& x) {
      if (x[ax] < lo || x[ax] >= hi) return out;
      return v[std::min(n - 1, static_cast<int>((x[ax] - lo) / (hi - lo) * n))];
    };
  }
  // override
  auto base = build_initial(c["base"], seed);
  std::vector<Box> regions;
  const int d = static_cast<int>(c["regions"][0]["lo"].size());
  for (const auto& r : c["regions"]) regions.push_back(box_from_canonical(r, d));
  const double v = c["value"];
  return [=](const Point& x) {
    for (const auto& b : regions)
      if (b.contains(x)) return v;
    return base(x);
  };
}

const std::set<std::string> kStudies{"run", "entropy-check", "kato-check", "cone-check", "converge", "germ"};

void check_study_requirements(const Scenario& s) {
  if ((s.study == "kato-check" || s.study == "cone-check") && !s.second_initial)
    fail("/second_initial", "study \"" + s.study + "\" needs a second initial datum");
  if (s.study == "cone-check" && !s.cone) fail("/cone", "study \"cone-check\" needs a cone block");
  if (s.study == "converge" && !s.converge) fail("/converge", "study \"converge\" needs a converge block");
  if (s.study == "germ" && !s.germ) fail("/germ", "study \"germ\" needs a germ block");
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::function<double(const Point&)> InitialSpec::build(unsigned seed) const { return build_initial(canonical, seed); }

const std::vector<std::string>& study_kinds() {
  static const std::vector<std::string> v(kStudies.begin(), kStudies.end());
  return v;
}

// ---------------------------------------------------------------------------
// Parsing

Scenario parse_scenario(const json& j) {
  check_keys(j, "", {"name", "study", "flux", "grid", "run", "initial", "second_initial", "charts", "entropy",
                     "kato", "cone", "converge", "germ"});
  Scenario s;
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail("/name", "expected a string");
    s.name = j["name"];
  }
  if (j.contains("study")) s.study = string_of(j["study"], "/study", kStudies);

  // flux
  const json& fj = require(j, "", "flux");
  check_keys(fj, "/flux", {"preset", "interface", "spec"});
  if (fj.contains("preset") == fj.contains("spec")) fail("/flux", "give exactly one of \"preset\" and \"spec\"");
  try {
    if (fj.contains("preset")) {
      if (!fj["preset"].is_string()) fail("/flux/preset", "expected a string");
      const std::string name = fj["preset"];
      const auto& names = preset_names();
      if (std::find(names.begin(), names.end(), name) == names.end())
        fail("/flux/preset", "unknown preset \"" + name + "\"");
      json spec = preset_json(name);
      if (fj.contains("interface")) {
        interface_from_json(fj["interface"], spec["d"].get<int>(), "/flux/interface");
        spec["interface"] = fj["interface"];
      }
      s.model = flux_from_json(spec, "/flux");
      s.model.set_name(name);
      s.flux = {{"preset", name}, {"interface", interface_to_json(s.model.interface())}};
    } else {
      if (fj.contains("interface")) fail("/flux/interface", "put the interface inside \"spec\"");
      s.model = flux_from_json(fj["spec"], "/flux/spec");
      s.model.set_name(s.name.empty() ? "custom" : s.name);
      s.flux = {{"spec", fj["spec"]}};
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  const int d = s.model.dim();
  const double a = s.model.lower(), b = s.model.upper();

  // grid
  const json& gj = require(j, "", "grid");
  check_keys(gj, "/grid", {"lo", "hi", "cells"});
  Box gb;
  gb.d = d;
  gb.lo = point_of(require(gj, "/grid", "lo"), "/grid/lo", d);
  gb.hi = point_of(require(gj, "/grid", "hi"), "/grid/hi", d);
  for (int k = 0; k < d; ++k)
    if (!(gb.lo[k] < gb.hi[k])) fail("/grid/hi", "each hi must exceed lo");
  const auto cells = cells_of(require(gj, "/grid", "cells"), "/grid/cells", d);
  s.grid = Grid(gb, {cells[0], d == 2 ? cells[1] : 1});

  // run
  const json rj = j.contains("run") ? j["run"] : json::object();
  check_keys(rj, "/run", {"eps", "T", "cfl", "mode", "smoothing_width", "boundary", "frames"});
  if (rj.contains("eps")) s.eps = positive(rj["eps"], "/run/eps");
  if (rj.contains("T")) s.T = positive(rj["T"], "/run/T");
  if (rj.contains("cfl")) {
    s.cfl = positive(rj["cfl"], "/run/cfl");
    if (s.cfl > 1.0) fail("/run/cfl", "must not exceed 1");
  }
  if (rj.contains("mode"))
    s.mode = string_of(rj["mode"], "/run/mode", {"smoothed", "mollified"}) == "smoothed" ? FluxMode::Smoothed
                                                                                       : FluxMode::Mollified;
  if (rj.contains("smoothing_width") && !rj["smoothing_width"].is_null())
    s.smoothing_width = positive(rj["smoothing_width"], "/run/smoothing_width");
  if (rj.contains("boundary")) {
    const json& bj = rj["boundary"];
    check_keys(bj, "/run/boundary", {"kind", "value"});
    const auto kind = string_of(require(bj, "/run/boundary", "kind"), "/run/boundary/kind", {"constant", "initial_trace"});
    if (kind == "constant") {
      s.boundary = Boundary::constant(state(require(bj, "/run/boundary", "value"), "/run/boundary/value", a, b));
    } else {
      if (bj.contains("value")) fail("/run/boundary/value", "initial_trace takes no value");
      s.boundary = Boundary::initial_trace();
    }
  }
  if (rj.contains("frames")) s.frames = integer(rj["frames"], "/run/frames", 1, 100000);

  s.initial = parse_initial(require(j, "", "initial"), "/initial", d, a, b);
  if (j.contains("second_initial")) s.second_initial = parse_initial(j["second_initial"], "/second_initial", d, a, b);

  if (j.contains("charts")) {
    if (!j["charts"].is_array()) fail("/charts", "expected an array");
    for (std::size_t i = 0; i < j["charts"].size(); ++i) {
      const std::string p = "/charts/" + std::to_string(i);
      const json& cj = j["charts"][i];
      check_keys(cj, p, {"center", "r", "R", "cells"});
      ChartSpec c;
      c.center = point_of(require(cj, p, "center"), p + "/center", d);
      c.r = positive(require(cj, p, "r"), p + "/r");
      c.R = positive(require(cj, p, "R"), p + "/R");
      if (cj.contains("cells")) c.cells = integer(cj["cells"], p + "/cells", 8, 1 << 16);
      s.charts.push_back(c);
    }
  }
  if (j.contains("entropy")) {
    const json& ej = j["entropy"];
    check_keys(ej, "/entropy", {"kind", "tol_factor", "bumps", "box"});
    EntropySpec e;
    if (ej.contains("kind")) e.kind = string_of(ej["kind"], "/entropy/kind", {"kruzhkov", "transformed"});
    if (ej.contains("tol_factor")) e.tol_factor = positive(ej["tol_factor"], "/entropy/tol_factor");
    if (ej.contains("bumps")) e.bumps = integer(ej["bumps"], "/entropy/bumps", 1, 1000);
    if (ej.contains("box") && !ej["box"].is_null()) e.box = box_of(ej["box"], "/entropy/box", d);
    s.entropy = e;
  }
  if (j.contains("kato")) {
    const json& kj = j["kato"];
    check_keys(kj, "/kato", {"tol_factor", "bumps", "eta"});
    KatoSpec k;
    if (kj.contains("tol_factor")) k.tol_factor = positive(kj["tol_factor"], "/kato/tol_factor");
    if (kj.contains("bumps")) k.bumps = integer(kj["bumps"], "/kato/bumps", 1, 1000);
    if (kj.contains("eta")) k.eta = positive(kj["eta"], "/kato/eta");
    s.kato = k;
  }
  if (j.contains("cone")) {
    const json& cj = j["cone"];
    check_keys(cj, "/cone", {"center", "R", "N", "tol"});
    ConeSpec c;
    c.center = point_of(require(cj, "/cone", "center"), "/cone/center", d);
    c.R = positive(require(cj, "/cone", "R"), "/cone/R");
    if (cj.contains("N") && !cj["N"].is_null()) c.N = positive(cj["N"], "/cone/N");
    if (cj.contains("tol")) c.tol = positive(cj["tol"], "/cone/tol");
    s.cone = c;
  }
  if (j.contains("converge")) {
    const json& cj = j["converge"];
    check_keys(cj, "/converge", {"epsilons", "comparison_cells"});
    ConvergeSpec c;
    c.epsilons = epsilon_list(require(cj, "/converge", "epsilons"), "/converge/epsilons", 2);
    c.comparison_cells = cells_of(require(cj, "/converge", "comparison_cells"), "/converge/comparison_cells", d);
    s.converge = c;
  }
  if (j.contains("germ")) {
    const json& gj2 = j["germ"];
    const std::string p = "/germ";
    check_keys(gj2, p, {"level", "data_box", "far_field", "epsilons", "comparison_cells", "threshold", "probe",
                        "probe_level"});
    GermSpec g;
    g.level = integer(require(gj2, p, "level"), p + "/level", 0, 8);
    g.data_box = box_of(require(gj2, p, "data_box"), p + "/data_box", d);
    for (int k = 0; k < d; ++k)
      if (g.data_box.lo[k] < gb.lo[k] || g.data_box.hi[k] > gb.hi[k]) fail(p + "/data_box", "must lie inside the grid box");
    if (gj2.contains("far_field") && !gj2["far_field"].is_null())
      g.far_field = state(gj2["far_field"], p + "/far_field", a, b);
    g.epsilons = epsilon_list(require(gj2, p, "epsilons"), p + "/epsilons", 4);
    g.comparison_cells = cells_of(require(gj2, p, "comparison_cells"), p + "/comparison_cells", d);
    if (gj2.contains("threshold") && !gj2["threshold"].is_null()) g.threshold = positive(gj2["threshold"], p + "/threshold");
    if (gj2.contains("probe") && !gj2["probe"].is_null()) g.probe = parse_initial(gj2["probe"], p + "/probe", d, a, b);
    if (gj2.contains("probe_level") && !gj2["probe_level"].is_null())
      g.probe_level = integer(gj2["probe_level"], p + "/probe_level", 0, 8);
    s.germ = g;
  }
  check_study_requirements(s);
  return s;
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("/: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("/: malformed JSON: ") + e.what());
  }
  return parse_scenario(j);
}

RunConfig Scenario::run_config() const {
  RunConfig c(model);
  c.eps = eps;
  c.smoothing_width = smoothing_width;
  c.T = T;
  c.cfl = cfl;
  c.mode = mode;
  c.boundary = boundary;
  for (int k = 1; k <= frames; ++k) c.output_times.push_back(T * k / frames);
  return c;
}

json Scenario::to_json() const {
  const int d = model.dim();
  std::vector<int> cells;
  for (int k = 0; k < d; ++k) cells.push_back(grid.cells(k));
  json boundary_j = boundary.kind == Boundary::Kind::Constant ? json{{"kind", "constant"}, {"value", boundary.value}}
                                                              : json{{"kind", "initial_trace"}};
  json j = {{"name", name},
            {"study", study},
            {"flux", flux},
            {"grid", {{"lo", point_json(grid.box().lo, d)}, {"hi", point_json(grid.box().hi, d)}, {"cells", cells}}},
            {"run",
             {{"eps", eps},
              {"T", T},
              {"cfl", cfl},
              {"mode", mode == FluxMode::Smoothed ? "smoothed" : "mollified"},
              {"smoothing_width", optional_number(smoothing_width)},
              {"boundary", boundary_j},
              {"frames", frames}}},
            {"initial", initial.canonical}};
  if (second_initial) j["second_initial"] = second_initial->canonical;
  if (!charts.empty()) {
    json cs = json::array();
    for (const auto& c : charts)
      cs.push_back({{"center", point_json(c.center, d)}, {"r", c.r}, {"R", c.R}, {"cells", c.cells}});
    j["charts"] = cs;
  }
  if (entropy)
    j["entropy"] = {{"kind", entropy->kind},
                    {"tol_factor", entropy->tol_factor},
                    {"bumps", entropy->bumps},
                    {"box", entropy->box ? box_json(*entropy->box) : json(nullptr)}};
  if (kato) j["kato"] = {{"tol_factor", kato->tol_factor}, {"bumps", kato->bumps}, {"eta", kato->eta}};
  if (cone)
    j["cone"] = {{"center", point_json(cone->center, d)}, {"R", cone->R}, {"N", optional_number(cone->N)},
                 {"tol", cone->tol}};
  if (converge) j["converge"] = {{"epsilons", converge->epsilons}, {"comparison_cells", converge->comparison_cells}};
  if (germ)
    j["germ"] = {{"level", germ->level},
                 {"data_box", box_json(germ->data_box)},
                 {"far_field", optional_number(germ->far_field)},
                 {"epsilons", germ->epsilons},
                 {"comparison_cells", germ->comparison_cells},
                 {"threshold", optional_number(germ->threshold)},
                 {"probe", germ->probe ? germ->probe->canonical : json(nullptr)},
                 {"probe_level", germ->probe_level ? json(*germ->probe_level) : json(nullptr)}};
  return j;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct Context {
  const Scenario& s;
  const ExecOptions& opt;
  fs::path out;
  json checks = json::object();
  bool pass = true;

  void check(const std::string& name, bool ok, json detail) {
    detail["pass"] = ok;
    checks[name] = std::move(detail);
    pass = pass && ok;
  }
  std::string path(const std::string& file) const { return (out / file).string(); }
};

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  f << j.dump(2) << '\n';
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

RunResult solve(const Scenario& s, const InitialSpec& init, unsigned seed) {
  return run(Field::sample(s.grid, init.build(seed)), s.run_config());
}

double trace_width(const Scenario& s) { return s.smoothing_width.value_or(s.eps); }

void max_principle(Context& c, const std::string& name, const Trajectory& frames) {
  const auto mp = max_principle_check(frames, c.s.model.lower(), c.s.model.upper());
  c.check(name, mp.pass,
          {{"min", mp.min_value}, {"max", mp.max_value}, {"frame", mp.frame}, {"cell", mp.cell}});
}

void study_run(Context& c) {
  const Scenario& s = c.s;
  const RunResult r = solve(s, s.initial, c.opt.seed);
  write_field_csv(c.path("fields.csv"), r.frames);
  write_json(c.path("manifest.json"), r.manifest.to_json());
  max_principle(c, "max_principle", r.frames);

  const double tol = c.opt.tol.value_or(2e-2);
  const auto init = s.initial.build(c.opt.seed);
  const Field& direct = r.frames.back();
  for (std::size_t l = 0; l < s.charts.size(); ++l) {
    const ChartSpec& cs = s.charts[l];
    const std::string tag = "chart_" + std::to_string(l);
    const Chart chart{cs.center, cs.r, s.model.interface(), cs.R};
    const ChartReport cr = validate_chart(chart);
    c.check(tag + "_valid", cr.pass, {{"reason", cr.reason}, {"worst_distance", cr.worst_distance}});
    if (!cr.pass) continue;
    // Flatten, extend radially about the flattened center, solve, map back.
    const Point ct = chart.flattened_center();
    const PiecewiseFlux flat = flatten_model(s.model);
    const PiecewiseFlux ext = radial_extend(flat, ct, cs.R);
    const int d = s.model.dim();
    Box fb;
    fb.d = d;
    for (int k = 0; k < d; ++k) {
      fb.lo[k] = ct[k] - cs.R;
      fb.hi[k] = ct[k] + cs.R;
    }
    const Grid fg = d == 1 ? Grid::line(fb.lo[0], fb.hi[0], cs.cells) : Grid::square(fb, cs.cells);
    RunConfig cfg = s.run_config();
    cfg.flux = ext;
    cfg.boundary = Boundary::initial_trace();
    const Interface& iface = s.model.interface();
    const RunResult fr = run(Field::sample(fg, [&](const Point& xt) { return init(unflatten(iface, xt)); }), cfg);
    write_field_csv(c.path(tag + "_fields.csv"), fr.frames);
    max_principle(c, tag + "_max_principle", fr.frames);

    // Compare in the cone section at T, where the extension cannot reach.
    const double N = speed_bound(ext, cs.R, std::max(std::abs(s.model.lower()), std::abs(s.model.upper())),
                                 SampleGrid{ct, 33, 2001})
                         .value;
    const double radius_T = cs.R - N * s.T;
    double l1 = 0.0;
    std::size_t compared = 0;
    std::ofstream cmp(c.path(tag + "_compare.csv"));
    cmp << (d == 1 ? "x1,u_chart,u_direct\n" : "x1,x2,u_chart,u_direct\n");
    char buf[128];
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
      const Point x = s.grid.center(i);
      const Point xt = flatten(iface, x);
      if (!(distance(xt, ct, d) < radius_T)) continue;
      const double uc = fr.frames.back().interpolate(xt);
      l1 += std::abs(uc - direct.u[i]) * s.grid.cell_volume();
      ++compared;
      if (d == 1)
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x[0], uc, direct.u[i]);
      else
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x[0], x[1], uc, direct.u[i]);
      cmp << buf;
    }
    c.check(tag + "_consistency", l1 <= tol,
            {{"l1", l1}, {"tol", tol}, {"cells", compared}, {"cone_radius_at_T", radius_T}, {"N", N}});

    // Transformed entropy battery inside the chart.
    Box eb;
    eb.d = d;
    for (int k = 0; k < d; ++k) {
      eb.lo[k] = ct[k] - 0.5 * cs.R;
      eb.hi[k] = ct[k] + 0.5 * cs.R;
    }
    const double tf = s.entropy ? s.entropy->tol_factor : 1e-2;
    const int nb = s.entropy ? s.entropy->bumps : 20;
    std::optional<TraceField> trace;
    if (ext.has_jump()) {
      trace = interface_trace(fr.frames, ext.interface(), ext.lower(), ext.upper(), trace_width(s));
      trace->write_csv(c.path(tag + "_trace.csv"));
    }
    const auto rep = entropy_battery(fr.frames, ext, lambda_battery(ext.lower(), ext.upper()), bump_battery(s.T, eb, nb),
                                     eb, tf, trace ? &*trace : nullptr);
    write_json(c.path(tag + "_entropy_report.json"), rep.to_json());
    c.check(tag + "_entropy", rep.pass, {{"min_residual", rep.min_residual}, {"min_scaled", rep.min_scaled}, {"tol_factor", tf}});
  }
}

void study_entropy(Context& c) {
  const Scenario& s = c.s;
  const EntropySpec e = s.entropy.value_or(EntropySpec{});
  const double tf = c.opt.tol.value_or(e.tol_factor);
  const bool transformed = e.kind == "transformed";
  // In the transformed kind the scenario grid is in flattened coordinates.
  const PiecewiseFlux model = transformed ? flatten_model(s.model) : s.model;
  RunConfig cfg = s.run_config();
  cfg.flux = model;
  auto init = s.initial.build(c.opt.seed);
  const Interface iface = s.model.interface();
  std::function<double(const Point&)> u0 = init;
  if (transformed) u0 = [init, iface](const Point& xt) { return init(unflatten(iface, xt)); };
  const RunResult r = run(Field::sample(s.grid, u0), cfg);
  write_field_csv(c.path("fields.csv"), r.frames);
  write_json(c.path("manifest.json"), r.manifest.to_json());
  max_principle(c, "max_principle", r.frames);
  std::optional<TraceField> trace;
  if (model.has_jump()) {
    trace = interface_trace(r.frames, model.interface(), model.lower(), model.upper(), trace_width(s));
    trace->write_csv(c.path("trace.csv"));
  }
  const Box box = e.box.value_or(s.grid.box());
  const auto rep = entropy_battery(r.frames, model, lambda_battery(model.lower(), model.upper()),
                                   bump_battery(s.T, box, e.bumps), box, tf, trace ? &*trace : nullptr);
  write_json(c.path("entropy_report.json"), rep.to_json());
  c.check("entropy", rep.pass,
          {{"kind", e.kind}, {"tol_factor", tf}, {"min_residual", rep.min_residual}, {"min_scaled", rep.min_scaled},
           {"count", rep.entries.size()}});
}

void study_kato(Context& c) {
  const Scenario& s = c.s;
  const KatoSpec k = s.kato.value_or(KatoSpec{});
  const double tf = c.opt.tol.value_or(k.tol_factor);
  const RunResult r1 = solve(s, s.initial, c.opt.seed);
  const RunResult r2 = solve(s, *s.second_initial, c.opt.seed + 1);
  write_field_csv(c.path("fields_1.csv"), r1.frames);
  write_field_csv(c.path("fields_2.csv"), r2.frames);
  max_principle(c, "max_principle_1", r1.frames);
  max_principle(c, "max_principle_2", r2.frames);
  const Box box = s.grid.box();
  const auto rep = kato_battery(r1.frames, r2.frames, s.model, bump_battery(s.T, box, k.bumps), box, tf);
  write_json(c.path("kato_report.json"), rep.to_json());
  c.check("kato", rep.pass, {{"tol_factor", tf}, {"min_residual", rep.min_residual}, {"min_scaled", rep.min_scaled}});
  const auto con = contraction_check({{&r1.frames, &r2.frames}}, k.eta);
  c.check("contraction", con.pass, {{"eta", k.eta}, {"worst_ratio", finite_or_null(con.worst_ratio)}});
}

void study_cone(Context& c) {
  const Scenario& s = c.s;
  const ConeSpec& cs = *s.cone;
  const int d = s.model.dim();
  const double M = std::max(std::abs(s.model.lower()), std::abs(s.model.upper()));
  const double radius = norm(cs.center, d) + cs.R;
  const DerivativeBound nb = speed_bound(s.model, radius, M);
  const DerivativeBound cb = mixed_derivative_bound(s.model, radius, M);
  const Cone cone{d, cs.center, cs.R, cs.N.value_or(nb.value)};
  const double tol = c.opt.tol.value_or(cs.tol);
  const RunResult r1 = solve(s, s.initial, c.opt.seed);
  const RunResult r2 = solve(s, *s.second_initial, c.opt.seed + 1);
  write_field_csv(c.path("fields_1.csv"), r1.frames);
  write_field_csv(c.path("fields_2.csv"), r2.frames);
  const auto loc = cone_locality_check(r1.frames, r2.frames, cone, tol);
  const auto gr = gronwall_check(r1.frames, r2.frames, cone, cb.value);
  json report = {{"N", cone.N}, {"C", cb.value}, {"height", cone.height()},
                 {"times", loc.times}, {"section_l1", loc.section_distance}, {"growth", gr.growth}};
  write_json(c.path("cone_report.json"), report);
  c.check("cone_locality", loc.pass,
          {{"kappa", loc.kappa}, {"tol", tol}, {"data_coincide_on_base", loc.data_coincide_on_base}, {"N", cone.N}});
  c.check("gronwall", gr.pass, {{"C", cb.value}, {"worst", finite_or_null(gr.worst)}, {"initial", gr.initial}});
}

void write_entry(const GermEntry& e, const fs::path& dir) {
  fs::create_directories(dir / "endpoints");
  std::ofstream f(dir / "deltas.csv");
  f << "k,eps,cells,delta\n";
  char buf[160];
  for (std::size_t k = 0; k < e.deltas.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%d,%.17g\n", k + 1, e.epsilons[k + 1], e.fine_cells[k + 1], e.deltas[k]);
    f << buf;
  }
  for (std::size_t k = 0; k < e.endpoints.size(); ++k)
    write_field_csv((dir / "endpoints" / ("k" + std::to_string(k) + ".csv")).string(), {e.endpoints[k]});
}

void study_converge(Context& c) {
  const Scenario& s = c.s;
  const ConvergeSpec& cv = *s.converge;
  const Grid comparison(s.grid.box(), {cv.comparison_cells[0], s.model.dim() == 2 ? cv.comparison_cells[1] : 1});
  const GermEntry e = run_sequence("datum", s.initial.build(c.opt.seed), cv.epsilons, s.run_config(), comparison,
                                   c.opt.cell_budget);
  write_entry(e, c.out);
  c.check("monotone_tail", tail_decreasing(e.deltas),
          {{"deltas", e.deltas}, {"delta_tail", finite_or_null(e.delta_tail)}, {"fine_cells", e.fine_cells}});
}

void study_germ(Context& c) {
  const Scenario& s = c.s;
  const GermSpec& g = *s.germ;
  GermStudy st(s.run_config());
  st.epsilons = g.epsilons;
  st.comparison = Grid(s.grid.box(), {g.comparison_cells[0], s.model.dim() == 2 ? g.comparison_cells[1] : 1});
  st.cell_budget = c.opt.cell_budget;
  const DenseFamily family(g.level, s.model.lower(), s.model.upper(), g.data_box, g.far_field);
  const double threshold = g.threshold.value_or(default_threshold(s.model.lower(), s.model.upper(), s.grid.box()));
  const GermRecord rec = build_record(family, st, threshold);
  json study = {{"family_size", family.size()}, {"threshold", threshold}};
  bool tails = true;
  std::string bad;
  for (const auto& e : rec.entries)
    if (!tail_decreasing(e.deltas)) {
      tails = false;
      if (bad.empty()) bad = e.id;
    }
  c.check("decreasing_tails", tails, {{"first_failure", bad}});
  c.check("selection", rec.selection.success, rec.selection.to_json());
  c.check("stability", rec.stability.pass, rec.stability.to_json());
  if (g.probe) {
    const Field u0 = Field::sample(st.comparison, g.probe->build(c.opt.seed));
    json est = json::array();
    bool finite = true;
    for (int level : {g.level, g.probe_level.value_or(g.level)}) {
      const DenseFamily f(level, s.model.lower(), s.model.upper(), g.data_box, g.far_field);
      const GermEstimate ge = germ_solve(u0, f, st);
      json ej = ge.to_json();
      ej["error_bar"] = finite_or_null(ge.error_bar);
      ej["delta_tail"] = finite_or_null(ge.delta_tail);
      est.push_back(ej);
      finite = finite && std::isfinite(ge.error_bar);
      write_field_csv(c.path("probe_limit_L" + std::to_string(level) + ".csv"), {ge.limit});
      if (!g.probe_level) break;
    }
    study["probe_estimates"] = est;
    c.check("probe", finite, {{"estimates", est}});
  }
  write_record(rec, c.out.string(), study);
}

}  // namespace

ExecResult execute(const Scenario& scenario, const ExecOptions& options) {
  ExecResult res;
  Context c{scenario, options, fs::path(options.out_dir)};
  json report = {{"study", scenario.study}, {"name", scenario.name}, {"seed", options.seed}};
  try {
    check_study_requirements(scenario);
    fs::create_directories(c.out);
    write_json(c.path("scenario.json"), scenario.to_json());
    if (scenario.study == "run")
      study_run(c);
    else if (scenario.study == "entropy-check")
      study_entropy(c);
    else if (scenario.study == "kato-check")
      study_kato(c);
    else if (scenario.study == "cone-check")
      study_cone(c);
    else if (scenario.study == "converge")
      study_converge(c);
    else
      study_germ(c);
    res.status = c.pass ? 0 : 2;
    report["pass"] = c.pass;
  } catch (const std::exception& e) {
    res.status = 1;
    report["pass"] = false;
    const char* type = dynamic_cast<const SolverError*>(&e)     ? "solver"
                       : dynamic_cast<const ResourceError*>(&e) ? "resource"
                       : dynamic_cast<const DomainError*>(&e)   ? "domain"
                       : dynamic_cast<const ScenarioError*>(&e) ? "schema"
                                                                : "runtime";
    report["error"] = {{"type", type}, {"message", e.what()}};
  }
  report["status"] = res.status;
  report["checks"] = c.checks;
  try {
    fs::create_directories(c.out);
    write_json(c.path("report.json"), report);
  } catch (const std::exception&) {
  }
  res.report = std::move(report);
  return res;
}

// ---------------------------------------------------------------------------
// Diff

json DiffReport::to_json() const { return {{"l1", l1}, {"max_abs", max_abs}, {"cells", cells}}; }

DiffReport diff_fields(const std::string& path_a, const std::string& path_b) {
  const Trajectory ta = read_field_csv(path_a), tb = read_field_csv(path_b);
  if (ta.empty() || tb.empty()) throw DomainError("empty field file");
  Field a = ta.back(), b = tb.back();
  if (a.grid != b.grid) {
    if (a.grid.refines(b.grid))
      a = a.block_average(b.grid);
    else if (b.grid.refines(a.grid))
      b = b.block_average(a.grid);
    else
      throw DomainError("field shapes differ and neither grid refines the other");
  }
  DiffReport r;
  r.l1 = l1_distance(a, b);
  for (std::size_t i = 0; i < a.u.size(); ++i) r.max_abs = std::max(r.max_abs, std::abs(a.u[i] - b.u[i]));
  r.cells = a.u.size();
  return r;
}

}  // namespace dflux
