// dflux command line: runs scenario studies and compares field files.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dflux/scenario.hpp"

namespace {

void print_summary(const nlohmann::json& report) {
  std::cout << report.value("study", std::string("?")) << ": " << (report.value("pass", false) ? "PASS" : "FAIL")
            << " (status " << report.value("status", 1) << ")\n";
  if (report.contains("error")) std::cout << "  error: " << report["error"]["message"].get<std::string>() << '\n';
  for (const auto& [name, check] : report["checks"].items())
    std::cout << "  " << name << ": " << (check.value("pass", false) ? "pass" : "FAIL") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Viscous approximation and entropy checks for discontinuous-flux conservation laws"};
  app.require_subcommand(1);
  app.fallthrough();

  dflux::ExecOptions opt;
  double tol = -1.0;
  app.add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", opt.seed, "Seed for random initial data")->capture_default_str();
  app.add_option("--tol", tol, "Override the study tolerance");
  app.add_option("--cell-budget", opt.cell_budget, "Largest grid a study may allocate")->capture_default_str();
  app.add_flag("--quiet", opt.quiet, "Print nothing on success");

  std::string scenario_path;
  for (const auto& study : dflux::study_kinds()) {
    auto* sub = app.add_subcommand(study, "Run the " + study + " study of a scenario");
    sub->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  }

  std::string file_a, file_b;
  double diff_l1 = -1.0, diff_max = -1.0;
  auto* diff = app.add_subcommand("diff", "Compare the last frames of two field CSV files");
  diff->add_option("a", file_a)->required()->check(CLI::ExistingFile);
  diff->add_option("b", file_b)->required()->check(CLI::ExistingFile);
  diff->add_option("--l1", diff_l1, "Fail if the L1 distance exceeds this");
  diff->add_option("--max-abs", diff_max, "Fail if the largest cell difference exceeds this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (tol >= 0.0) opt.tol = tol;

  if (diff->parsed()) {
    try {
      const auto r = dflux::diff_fields(file_a, file_b);
      if (diff_l1 < 0.0 && opt.tol) diff_l1 = *opt.tol;
      const bool ok = (diff_l1 < 0.0 || r.l1 <= diff_l1) && (diff_max < 0.0 || r.max_abs <= diff_max);
      if (!opt.quiet || !ok) std::cout << r.to_json().dump() << '\n';
      return ok ? 0 : 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }

  dflux::Scenario scenario;
  try {
    scenario = dflux::parse_scenario_file(scenario_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  for (auto* sub : app.get_subcommands())
    if (sub->get_name() != "diff") scenario.study = sub->get_name();

  const auto res = dflux::execute(scenario, opt);
  if (res.status == 1) std::cerr << "error: " << res.report["error"]["message"].get<std::string>() << '\n';
  if (!opt.quiet || res.status != 0) print_summary(res.report);
  return res.status;
}
