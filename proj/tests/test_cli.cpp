#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dflux/scenario.hpp"

using namespace dflux;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = DFLUX_SCENARIO_DIR;
const fs::path kGolden = DFLUX_GOLDEN_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dflux_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(DFLUX_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string error_of(const json& j) {
  try {
    parse_scenario(j);
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

json minimal() {
  return json::parse(R"({"flux":{"preset":"burgers"},"grid":{"lo":[-1],"hi":[1],"cells":[50]},
                         "run":{"eps":0.01,"T":0.1},"initial":{"kind":"constant","value":0.5}})");
}

std::vector<std::vector<double>> read_matrix(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  std::vector<std::vector<double>> m;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(cell == "nan" ? NAN : std::stod(cell));
    m.push_back(row);
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing

TEST(Parse, ShippedScenarioMatchesGolden) {
  const Scenario s = parse_scenario_file((kScenarios / "burgers_shock.json").string());
  EXPECT_EQ(s.to_json(), read_json(kGolden / "burgers_shock.canonical.json"));
}

TEST(Parse, CanonicalFormIsAFixedPoint) {
  for (const auto& e : fs::directory_iterator(kScenarios)) {
    const json c = parse_scenario_file(e.path().string()).to_json();
    EXPECT_EQ(parse_scenario(c).to_json().dump(), c.dump()) << e.path();
  }
}

TEST(Parse, UnknownKeyIsNamed) {
  json j = minimal();
  j["run"]["epslon"] = 0.01;
  const std::string msg = error_of(j);
  EXPECT_NE(msg.find("/run/epslon"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
  json k = minimal();
  k["extra"] = 1;
  EXPECT_NE(error_of(k).find("/extra"), std::string::npos);
}

TEST(Parse, NonPositiveEpsilonCitesTheField) {
  for (double eps : {0.0, -1e-3}) {
    json j = minimal();
    j["run"]["eps"] = eps;
    const std::string msg = error_of(j);
    EXPECT_EQ(msg.rfind("/run/eps:", 0), 0u) << msg;
  }
}

TEST(Parse, SchemaViolations) {
  json j = minimal();
  j["flux"]["preset"] = "burger";
  EXPECT_NE(error_of(j).find("/flux/preset"), std::string::npos);
  j = minimal();
  j["initial"]["value"] = 1.5;
  EXPECT_NE(error_of(j).find("/initial/value"), std::string::npos);
  j = minimal();
  j["grid"]["cells"] = {50, 50};
  EXPECT_NE(error_of(j).find("/grid/cells"), std::string::npos);
  j = minimal();
  j["study"] = "kato-check";
  EXPECT_NE(error_of(j).find("/second_initial"), std::string::npos);
  j = minimal();
  j["run"]["mode"] = "fast";
  EXPECT_NE(error_of(j).find("/run/mode"), std::string::npos);
  j = minimal();
  j["converge"] = {{"epsilons", {0.01, 0.02}}, {"comparison_cells", {50}}};
  EXPECT_NE(error_of(j).find("/converge/epsilons/1"), std::string::npos);
}

TEST(Parse, MalformedJsonIsAScenarioError) {
  const fs::path dir = scratch("malformed");
  write_text(dir / "bad.json", "{\"flux\": ");
  EXPECT_THROW(parse_scenario_file((dir / "bad.json").string()), ScenarioError);
  EXPECT_THROW(parse_scenario_file((dir / "missing.json").string()), ScenarioError);
}

TEST(Parse, RandomStepsFollowTheSeed) {
  json j = minimal();
  j["initial"] = {{"kind", "random_steps"}, {"lo", -0.5}, {"hi", 0.5}, {"pieces", 5}};
  const Scenario s = parse_scenario(j);
  const auto f1 = s.initial.build(3), f2 = s.initial.build(3), f3 = s.initial.build(4);
  bool differs = false;
  for (double x = -0.49; x < 0.5; x += 0.1) {
    EXPECT_EQ(f1({x, 0}), f2({x, 0}));
    EXPECT_GE(f1({x, 0}), 0.0);
    EXPECT_LE(f1({x, 0}), 1.0);
    differs = differs || f1({x, 0}) != f3({x, 0});
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(f1({0.7, 0}), 0.0);
}

TEST(Parse, OverrideRegions) {
  json j = minimal();
  j["initial"] = json::parse(R"({"kind":"override","base":{"kind":"constant","value":0.2},
                                 "regions":[{"lo":[0.1],"hi":[0.3]}],"value":0.9})");
  const auto f = parse_scenario(j).initial.build(0);
  EXPECT_EQ(f({0.2, 0}), 0.9);
  EXPECT_EQ(f({0.5, 0}), 0.2);
}

// ---------------------------------------------------------------------------
// diff

TEST(Diff, FileAgainstItself) {
  const fs::path dir = scratch("diff_self");
  const Grid g = Grid::line(0, 1, 100);
  write_field_csv((dir / "a.csv").string(), {Field::sample(g, [](const Point& x) { return x[0] * x[0]; })});
  const auto r = diff_fields((dir / "a.csv").string(), (dir / "a.csv").string());
  EXPECT_EQ(r.l1, 0.0);
  EXPECT_EQ(r.max_abs, 0.0);
  EXPECT_EQ(cli("diff " + (dir / "a.csv").string() + " " + (dir / "a.csv").string() + " --tol 0"), 0);
}

TEST(Diff, OneCellDifference) {
  const fs::path dir = scratch("diff_cell");
  const Grid g = Grid::line(0, 1, 100);
  Field a = Field::sample(g, [](const Point&) { return 0.2; });
  Field b = a;
  b.u[37] += 0.5;
  write_field_csv((dir / "a.csv").string(), {a});
  write_field_csv((dir / "b.csv").string(), {b});
  const auto r = diff_fields((dir / "a.csv").string(), (dir / "b.csv").string());
  EXPECT_NEAR(r.l1, 0.005, 1e-15);
  EXPECT_NEAR(r.max_abs, 0.5, 1e-15);
  const std::string files = (dir / "a.csv").string() + " " + (dir / "b.csv").string();
  EXPECT_EQ(cli("diff " + files + " --tol 0.006"), 0);
  EXPECT_EQ(cli("diff " + files + " --tol 0.004"), 2);
  EXPECT_EQ(cli("diff " + files + " --max-abs 0.4"), 2);
}

TEST(Diff, ShapeMismatch) {
  const fs::path dir = scratch("diff_shape");
  write_field_csv((dir / "a.csv").string(), {Field::sample(Grid::line(0, 1, 100), [](const Point&) { return 0.0; })});
  write_field_csv((dir / "b.csv").string(), {Field::sample(Grid::line(0, 1, 30), [](const Point&) { return 0.0; })});
  EXPECT_THROW(diff_fields((dir / "a.csv").string(), (dir / "b.csv").string()), DomainError);
  EXPECT_EQ(cli("diff " + (dir / "a.csv").string() + " " + (dir / "b.csv").string()), 1);
}

TEST(Diff, RefinedAgainstCoarseRun) {
  const fs::path dir = scratch("diff_refine");
  json j = minimal();
  j["run"] = {{"eps", 0.01}, {"T", 0.3}, {"frames", 3}};
  j["initial"] = {{"kind", "riemann"}, {"left", 0.8}, {"right", 0.1}};
  write_text(dir / "coarse.json", j.dump());
  j["grid"]["cells"] = {200};
  write_text(dir / "fine.json", j.dump());
  ASSERT_EQ(cli("run " + (dir / "coarse.json").string() + " --out " + (dir / "c").string()), 0);
  ASSERT_EQ(cli("run " + (dir / "fine.json").string() + " --out " + (dir / "f").string()), 0);
  const auto r = diff_fields((dir / "f" / "fields.csv").string(), (dir / "c" / "fields.csv").string());
  EXPECT_GT(r.l1, 0.0);
  EXPECT_LT(r.l1, 2e-2);
  EXPECT_EQ(cli("diff " + (dir / "f" / "fields.csv").string() + " " + (dir / "c" / "fields.csv").string() +
                " --tol 2e-2"),
            0);
}

// ---------------------------------------------------------------------------
// execute

TEST(Cli, ExitStatusContract) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(cli("--no-such-flag"), 1);
  EXPECT_EQ(cli("run"), 1);
  json bad = minimal();
  bad["run"]["epslon"] = 1;
  write_text(dir / "bad.json", bad.dump());
  EXPECT_EQ(cli("run " + (dir / "bad.json").string() + " --out " + (dir / "bad").string()), 1);

  // Perturbation inside the cone base: locality must be reported as violated.
  json j = read_json(kScenarios / "burgers_cone.json");
  j["second_initial"]["regions"] = json::parse(R"([{"lo":[-0.2],"hi":[0.0]}])");
  write_text(dir / "inbase.json", j.dump());
  EXPECT_EQ(cli("cone-check " + (dir / "inbase.json").string() + " --out " + (dir / "inbase").string()), 2);
  const json rep = read_json(dir / "inbase" / "report.json");
  EXPECT_EQ(rep["status"], 2);
  EXPECT_FALSE(rep["checks"]["cone_locality"]["pass"].get<bool>());
  EXPECT_FALSE(rep["checks"]["cone_locality"]["data_coincide_on_base"].get<bool>());

  // Resource errors are runtime failures with a machine-readable report.
  EXPECT_EQ(cli("converge " + (kScenarios / "two_flux_interface.json").string() + " --cell-budget 100 --out " +
                (dir / "budget").string()),
            1);
  EXPECT_EQ(read_json(dir / "budget" / "report.json")["error"]["type"], "resource");
}

TEST(Cli, BurgersShockEntropyCheck) {
  const fs::path dir = scratch("shock");
  ASSERT_EQ(cli("entropy-check " + (kScenarios / "burgers_shock.json").string() + " --out " + dir.string()), 0);
  const json rep = read_json(dir / "report.json");
  EXPECT_GE(rep["checks"]["entropy"]["min_scaled"].get<double>(), -1e-3);
  EXPECT_TRUE(fs::exists(dir / "entropy_report.json"));
  EXPECT_EQ(read_json(dir / "entropy_report.json")["entries"].size(), 220u);
}

TEST(Cli, ConvergeEmitsMonotoneTail) {
  const fs::path dir = scratch("converge");
  ASSERT_EQ(cli("converge " + (kScenarios / "two_flux_interface.json").string() + " --out " + dir.string()), 0);
  std::ifstream f(dir / "deltas.csv");
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "k,eps,cells,delta");
  std::vector<double> deltas;
  while (std::getline(f, line)) deltas.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  ASSERT_EQ(deltas.size(), 3u);
  for (std::size_t k = 1; k < deltas.size(); ++k) EXPECT_LT(deltas[k], deltas[k - 1]);
}

TEST(Cli, GermRecordDirectory) {
  const fs::path dir = scratch("germ");
  ASSERT_EQ(cli("germ " + (kScenarios / "germ_level1.json").string() + " --out " + dir.string()), 0);
  const json man = read_json(dir / "manifest.json");
  EXPECT_EQ(man["level"], 1);
  const auto data = read_matrix(dir / "contraction_data.csv");
  const auto lim = read_matrix(dir / "contraction_limit.csv");
  ASSERT_EQ(data.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    ASSERT_EQ(lim[i].size(), 9u);
    EXPECT_EQ(lim[i][i], 0.0);
    for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(lim[i][k], lim[k][i]);
  }
  EXPECT_TRUE(fs::exists(dir / "endpoints" / "L1_0_0_k0.csv"));
  const json rep = read_json(dir / "report.json");
  const auto& est = rep["checks"]["probe"]["estimates"];
  ASSERT_EQ(est.size(), 2u);
  EXPECT_LE(est[1]["error_bar"].get<double>(), 0.5 * est[0]["error_bar"].get<double>());
}

TEST(Cli, ChartedRunVerifiesInFlattenedCoordinates) {
  const fs::path dir = scratch("chart");
  ASSERT_EQ(cli("run " + (kScenarios / "interface_chart_2d.json").string() + " --out " + dir.string()), 0);
  for (const char* f : {"fields.csv", "manifest.json", "chart_0_fields.csv", "chart_0_compare.csv", "chart_0_trace.csv",
                        "chart_0_entropy_report.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const json rep = read_json(dir / "report.json");
  EXPECT_LE(rep["checks"]["chart_0_consistency"]["l1"].get<double>(), 2e-2);
}

TEST(Cli, KatoScenario) {
  const fs::path dir = scratch("kato");
  EXPECT_EQ(cli("kato-check " + (kScenarios / "sedimentation_kato.json").string() + " --out " + dir.string()), 0);
}

TEST(Cli, SameSeedGivesIdenticalBytes) {
  const fs::path dir = scratch("determinism");
  const std::string sc = (kScenarios / "sedimentation_kato.json").string();
  ASSERT_EQ(cli("kato-check " + sc + " --seed 7 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(cli("kato-check " + sc + " --seed 7 --out " + (dir / "b").string()), 0);
  ASSERT_EQ(cli("kato-check " + sc + " --seed 8 --out " + (dir / "c").string()), 0);
  for (const char* f : {"fields_1.csv", "fields_2.csv", "kato_report.json"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_NE(slurp(dir / "a" / "fields_1.csv"), slurp(dir / "c" / "fields_1.csv"));
}

TEST(Cli, ArtifactsAreEnoughToReRun) {
  const fs::path dir = scratch("closure");
  ASSERT_EQ(cli("entropy-check " + (kScenarios / "burgers_shock.json").string() + " --out " + (dir / "a").string()), 0);
  // scenario.json alone reproduces the study.
  const json written = read_json(dir / "a" / "scenario.json");
  ASSERT_EQ(written["study"], "entropy-check");
  ASSERT_EQ(cli("entropy-check " + (dir / "a" / "scenario.json").string() + " --out " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "fields.csv"), slurp(dir / "b" / "fields.csv"));
  EXPECT_EQ(slurp(dir / "a" / "scenario.json"), slurp(dir / "b" / "scenario.json"));
  EXPECT_EQ(read_json(dir / "a" / "report.json")["checks"], read_json(dir / "b" / "report.json")["checks"]);
}
