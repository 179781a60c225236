#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dflux/entropy.hpp"
#include "dflux/germ.hpp"
#include "dflux/presets.hpp"

using namespace dflux;

namespace {

Box box1(double lo, double hi) {
  Box b;
  b.d = 1;
  b.lo[0] = lo;
  b.hi[0] = hi;
  return b;
}

GermStudy small_study(const std::string& preset) {
  RunConfig c(make_preset(preset));
  c.T = 0.2;
  c.boundary = Boundary::initial_trace();
  GermStudy s(c);
  s.epsilons = {0.04, 0.02, 0.01, 0.005};
  s.comparison = Grid::line(-1, 1, 64);
  return s;
}

GermEntry fake_entry(const std::string& id, std::vector<double> deltas) {
  GermEntry e;
  e.id = id;
  e.epsilons.assign(deltas.size() + 1, 0.0);
  for (std::size_t k = 0; k < e.epsilons.size(); ++k) e.epsilons[k] = std::ldexp(0.1, -static_cast<int>(k));
  e.deltas = std::move(deltas);
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense family

TEST(DenseFamily, LevelZeroIsTheTwoConstants) {
  const DenseFamily f(0, 0.0, 1.0, box1(0, 1));
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f.member(0)({0.5, 0}), 0.0);
  EXPECT_EQ(f.member(1)({0.5, 0}), 1.0);
}

TEST(DenseFamily, LevelOneHasNineMembers) {
  const DenseFamily f(1, 0.0, 1.0, box1(0, 1));
  ASSERT_EQ(f.size(), 9u);
  const auto ms = f.members();
  EXPECT_EQ(ms.front().digits, (std::vector<int>{0, 0}));
  EXPECT_EQ(ms[5].digits, (std::vector<int>{1, 2}));
  EXPECT_EQ(ms.back().digits, (std::vector<int>{2, 2}));
  EXPECT_DOUBLE_EQ(ms[5]({0.25, 0}), 0.5);
  EXPECT_DOUBLE_EQ(ms[5]({0.75, 0}), 1.0);
  EXPECT_EQ(ms[5].id, "L1_1_2");
}

TEST(DenseFamily, CountsMatchCombinatorics) {
  for (int n = 0; n <= 2; ++n) {
    const DenseFamily f1(n, -1.0, 2.0, box1(0, 1));
    EXPECT_EQ(f1.size(), static_cast<std::uint64_t>(std::llround(std::pow((1 << n) + 1, 1 << n))));
  }
  Box b2;
  b2.d = 2;
  b2.lo = {0, 0};
  b2.hi = {1, 1};
  EXPECT_EQ(DenseFamily(1, 0, 1, b2).size(), 81u);
  EXPECT_THROW(DenseFamily(4, 0, 1, b2).size(), ResourceError);
}

TEST(DenseFamily, MembersStayInRange) {
  const DenseFamily f(2, 0.2, 0.9, box1(-0.5, 0.5));
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> U(-1, 1);
  for (std::uint64_t i = 0; i < f.size(); i += 7) {
    const auto m = f.member(i);
    for (int k = 0; k < 20; ++k) {
      const double v = m({U(rng), 0});
      EXPECT_GE(v, 0.2);
      EXPECT_LE(v, 0.9);
    }
  }
}

TEST(DenseFamily, LevelsNest) {
  const Box b = box1(-0.5, 0.5);
  const DenseFamily f1(1, 0, 1, b), f2(2, 0, 1, b);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> U(-1, 1);
  for (const auto& m : f1.members()) {
    const auto r = refine(m);
    const auto idx = f2.index_of(r);
    ASSERT_TRUE(idx.has_value());
    EXPECT_EQ(f2.member(*idx).digits, r.digits);
    for (int k = 0; k < 50; ++k) {
      const Point x{U(rng), 0};
      EXPECT_DOUBLE_EQ(m(x), r(x));
    }
  }
  EXPECT_FALSE(f1.index_of(f2.member(3)).has_value());
}

TEST(DenseFamily, NearestReproducesMembersAndBoundsError) {
  const Box b = box1(-0.5, 0.5);
  const Grid g = Grid::line(-1, 1, 256);
  const DenseFamily f1(1, 0, 1, b);
  for (const auto& m : f1.members()) EXPECT_EQ(f1.nearest(m.sample(g)).id, m.id);
  // Smooth profile at level 3: error of the cellwise best value is at most
  // the rounding (b - a) 2^-3 / 2 plus the oscillation on each cell.
  const DenseFamily f3(3, 0, 1, b);
  const Field u = Field::sample(g, [&](const Point& x) { return b.contains(x) ? 0.5 + 0.4 * std::sin(3 * x[0]) : 0.0; });
  const auto m = f3.nearest(u);
  const double err = l1_distance(m.sample(g), u);
  EXPECT_LE(err, 1.0 * 0.125 * b.volume());
}

// ---------------------------------------------------------------------------
// Sequences

TEST(Sequence, CellsForEpsilon) {
  EXPECT_EQ(cells_for_epsilon(2.0, 64, 0.005), 1600);
  EXPECT_EQ(cells_for_epsilon(2.0, 256, 0.0025), 3328);
  EXPECT_EQ(cells_for_epsilon(2.0, 64, 1.0), 64);
  EXPECT_LE(2.0 / cells_for_epsilon(2.0, 100, 0.003), 0.003 / 4);
}

TEST(Sequence, GeometricTail) {
  EXPECT_DOUBLE_EQ(geometric_tail({0.4, 0.2, 0.1}), 0.1);
  EXPECT_EQ(geometric_tail({0.0, 0.0}), 0.0);
  EXPECT_TRUE(std::isinf(geometric_tail({0.1, 0.2})));
}

TEST(Sequence, ConstantDatumHasZeroDeltas) {
  auto s = small_study("burgers");
  const auto e = run_sequence("const", [](const Point&) { return 0.0; }, s.epsilons, s.base, s.comparison, s.cell_budget);
  ASSERT_EQ(e.deltas.size(), 3u);
  for (double d : e.deltas) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(e.delta_tail, 0.0);
  EXPECT_EQ(e.fine_cells.back(), 1600);
}

TEST(Sequence, RarefactionDeltasDecrease) {
  auto s = small_study("burgers");
  // f = u - u^2 has f' = 1 - 2u, so a decreasing jump opens a fan.
  const auto e = run_sequence("fan", [](const Point& x) { return x[0] < 0 ? 0.9 : 0.1; }, s.epsilons, s.base,
                              s.comparison, s.cell_budget);
  for (std::size_t k = 1; k < e.deltas.size(); ++k) EXPECT_LT(e.deltas[k], e.deltas[k - 1]);
  EXPECT_GT(e.deltas.front(), 0.0);
}

TEST(Sequence, InterfaceStepDeltasDecrease) {
  auto s = small_study("two_flux");
  const auto e = run_sequence("step", [](const Point& x) { return std::abs(x[0] + 0.2) < 0.3 ? 0.8 : 0.1; },
                              s.epsilons, s.base, s.comparison, s.cell_budget);
  EXPECT_LT(e.deltas[2], e.deltas[1]);
  EXPECT_TRUE(std::isfinite(e.delta_tail));
}

TEST(Sequence, RefusesGridsAboveBudget) {
  auto s = small_study("burgers");
  EXPECT_THROW(run_sequence("x", [](const Point&) { return 0.0; }, s.epsilons, s.base, s.comparison, 1000),
               ResourceError);
  EXPECT_THROW(run_sequence("x", [](const Point&) { return 0.0; }, {0.01, 0.02}, s.base, s.comparison, 1 << 20),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Selection and stability

TEST(Selection, ConstantDatumSucceeds) {
  const auto e = fake_entry("const", {0, 0, 0});
  const auto r = diagonal_select({&e}, 0.1);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Selection, PicksAgainstHalvingThresholds) {
  const auto a = fake_entry("a", {0.08, 0.03, 0.01, 0.004});
  const auto b = fake_entry("b", {0.12, 0.04, 0.02, 0.005});
  const auto r = diagonal_select({&a, &b}, 0.1);
  EXPECT_TRUE(r.success);
  // Step 0 needs <= 0.1 (k = 1), step 1 <= 0.05 (k = 2), step 2 <= 0.025 (k = 3).
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Selection, NonDecreasingRecordFails) {
  const auto good = fake_entry("good", {0.04, 0.02, 0.01});
  const auto bad = fake_entry("bad", {0.01, 0.02, 0.03});
  const auto r = diagonal_select({&good, &bad}, 0.1);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.failing_datum, "bad");
  const auto short_rec = fake_entry("short", {0.01, 0.005});
  EXPECT_FALSE(diagonal_select({&short_rec}, 0.1).success);
}

TEST(Stability, LevelOneBurgersFamily) {
  auto s = small_study("burgers");
  s.epsilons = {0.04, 0.02, 0.01, 0.005};
  const DenseFamily f(1, 0, 1, box1(-0.5, 0.5));
  const auto rec = build_record(f, s, default_threshold(0, 1, s.comparison.box()));
  ASSERT_EQ(rec.entries.size(), 9u);
  const auto& m = rec.matrix;
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(m.data[i][i], 0.0);
    EXPECT_EQ(m.limit[i][i], 0.0);
    EXPECT_TRUE(std::isnan(m.ratio[i][i]));
    for (std::size_t j = 0; j < 9; ++j) {
      EXPECT_EQ(m.limit[i][j], m.limit[j][i]);
      EXPECT_EQ(m.data[i][j], m.data[j][i]);
    }
  }
  EXPECT_EQ(rec.stability.pairs, 36u);
  EXPECT_TRUE(rec.stability.pass) << rec.stability.worst_ratio;
  EXPECT_TRUE(rec.selection.success) << rec.selection.reason;

  // Deltas are recomputable from the stored endpoint files.
  const auto dir = std::filesystem::temp_directory_path() / "dflux_germ_record";
  std::filesystem::remove_all(dir);
  write_record(rec, dir.string());
  nlohmann::json man;
  std::ifstream(dir / "manifest.json") >> man;
  ASSERT_EQ(man["members"].size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    const auto& mem = man["members"][i];
    for (std::size_t k = 0; k < 3; ++k) {
      const auto a = read_field_csv((dir / mem["endpoints"][k].get<std::string>()).string());
      const auto b = read_field_csv((dir / mem["endpoints"][k + 1].get<std::string>()).string());
      EXPECT_EQ(l1_distance(b[0], a[0]), mem["deltas"][k].get<double>());
    }
  }
  std::ifstream csv(dir / "contraction_ratio.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header.substr(0, 9), "id,L1_0_0");
  std::filesystem::remove_all(dir);
}

TEST(Stability, ReportSkipsCoincidingData) {
  ContractionMatrix m;
  m.ids = {"a", "b"};
  m.data = {{0, 0.5}, {0.5, 0}};
  m.limit = {{0, 0.6}, {0.6, 0}};
  m.ratio = {{NAN, 1.2}, {1.2, NAN}};
  const auto r = stability_report(m);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.pairs, 1u);
  EXPECT_DOUBLE_EQ(r.worst_ratio, 1.2);
  EXPECT_EQ(r.worst_i, "a");
}

// ---------------------------------------------------------------------------
// Germ solve

TEST(GermSolve, MemberIsReusedExactly) {
  auto s = small_study("two_flux");
  const DenseFamily f(1, 0, 1, box1(-0.5, 0.5));
  const auto m = f.member(5);
  const auto first = germ_solve(m.sample(s.comparison), f, s);
  EXPECT_FALSE(first.reused);
  EXPECT_EQ(first.member_id, m.id);
  EXPECT_EQ(first.data_distance, 0.0);
  EXPECT_EQ(first.error_bar, first.delta_tail);
  const auto again = germ_solve(m.sample(s.comparison), f, s);
  EXPECT_TRUE(again.reused);
  EXPECT_EQ(again.error_bar, first.error_bar);
  EXPECT_EQ(again.limit.u, first.limit.u);
}

TEST(GermSolve, TriangleInequalityBetweenInputs) {
  auto s = small_study("two_flux");
  const DenseFamily f(2, 0, 1, box1(-0.5, 0.5));
  const Box b = box1(-0.5, 0.5);
  const Field u = Field::sample(s.comparison, [&](const Point& x) { return b.contains(x) ? 0.3 + 0.2 * x[0] : 0.0; });
  const Field v = Field::sample(s.comparison, [&](const Point& x) { return b.contains(x) ? 0.45 + 0.3 * x[0] : 0.0; });
  const auto eu = germ_solve(u, f, s, 0.5);
  const auto ev = germ_solve(v, f, s, 1e-6);
  EXPECT_TRUE(eu.meets_target);
  EXPECT_FALSE(ev.meets_target);
  const double eta = l1_distance(u, v);
  EXPECT_LE(l1_distance(eu.limit, ev.limit), eta + eu.error_bar + ev.error_bar);
  // Smooth-ish data at level 2: the data part of the bar is below (b - a) 2^-2 |box|.
  EXPECT_LE(eu.data_distance, 0.25 * b.volume());
  EXPECT_THROW(germ_solve(Field(Grid::line(-1, 1, 32)), f, s), DomainError);
}
