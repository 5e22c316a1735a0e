#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mirror/phantom.hpp"
#include "mirror/report.hpp"
#include "mirror/sweep.hpp"
#include "test_util.hpp"

using namespace mirror;
using mirror::testing::TempDir;

namespace {

// Seeded toy results with v1 < v2 < v3 on every L.
std::vector<SweepRow> toy_rows(uint64_t seed = 0) {
  Philox rng(seed);
  std::vector<SweepRow> rows;
  for (const auto& cell : table2_grid({seed}).cells) {
    SweepRow r;
    r.cell = cell;
    r.status = "ok";
    const double bump = cell.version == Version::v1 ? 0.0 : cell.version == Version::v2 ? 0.02 : 0.04;
    r.metrics = {"mean", 0.5 + bump + 0.01 * rng.uniform(), rng.uniform(), rng.uniform()};
    rows.push_back(r);
  }
  return rows;
}

size_t line_count(const std::filesystem::path& p) {
  std::ifstream is(p);
  size_t n = 0;
  std::string line;
  while (std::getline(is, line)) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("weight-sharing grid sizes") {
  const auto g = table2_grid({0});
  int64_t v13 = 0, v4 = 0;
  for (const auto& c : g.cells) (c.version == Version::v4 ? v4 : v13) += 1;
  CHECK(v13 == 63);
  CHECK(v4 == 42);
  CHECK(g.skipped.empty());
  CHECK(table2_grid({0, 1, 2}).cells.size() == 3 * 105);
  std::set<std::string> settings;
  for (const auto& c : g.cells) {
    if (c.version == Version::v4) settings.insert(c.setting());
  }
  CHECK((settings == std::set<std::string>{"0.1", "0.2", "0.3", "0.4", "0.5", "learnable"}));
}

TEST_CASE("custom grids skip undefined cells with a reason") {
  const auto g = custom_grid({Version::v1}, {StageIndexSet{5}}, {Corruption::none}, {Theta{0.3, false}}, {0});
  CHECK(g.cells.empty());
  REQUIRE(g.skipped.size() == 1);
  CHECK(g.skipped[0].reason == "θ undefined for v1");
  const auto ok = custom_grid({Version::v4}, {StageIndexSet{5}}, {}, {Theta{0.3, false}}, {0, 1});
  CHECK(ok.cells.size() == 2);
  const auto cfg = cell_config(TrainConfig{}, ok.cells[0]);
  CHECK(cfg.model.version == Version::v4);
  CHECK(cfg.model.theta.fixed == 0.3);
}

TEST_CASE("sweep CSV round trips") {
  TempDir tmp("sweepcsv");
  auto rows = toy_rows();
  rows[3].status = "failed";
  rows[3].reason = "boom, \"quoted\"";
  write_sweep_csv(tmp.path() / "s.csv", rows);
  const auto back = read_sweep_csv(tmp.path() / "s.csv");
  REQUIRE(back.size() == rows.size());
  for (size_t n = 0; n < rows.size(); ++n) {
    CHECK(back[n].cell.version == rows[n].cell.version);
    CHECK(back[n].cell.shared == rows[n].cell.shared);
    CHECK(back[n].cell.setting() == rows[n].cell.setting());
    CHECK(back[n].status == rows[n].status);
    if (rows[n].status == "ok") CHECK(back[n].metrics.dice == doctest::Approx(rows[n].metrics.dice).epsilon(1e-9));
  }
  CHECK(back[3].reason == rows[3].reason);
  write_sweep_table(tmp.path() / "t.csv", rows);
  // Header plus v1-v3 x 3 settings plus 6 theta rows.
  CHECK(line_count(tmp.path() / "t.csv") == 1 + 9 + 6);
}

TEST_CASE("report aggregates, orders versions and lists missing cells") {
  TempDir tmp("report");
  const auto rows = toy_rows();
  const auto bundle = emit_report(rows, tmp.path() / "full");
  CHECK(bundle.by_shared.size() == 7);
  CHECK(bundle.by_corruption.size() == 3);
  CHECK(bundle.warnings.empty());
  std::set<std::string> summaries;
  for (const auto& o : bundle.ordering) summaries.insert(o.summary());
  CHECK(summaries.count("v2<v3: 7/7 L-sets") == 1);
  CHECK(summaries.count("v1<v2: 7/7 L-sets") == 1);
  CHECK(line_count(tmp.path() / "full" / "box_by_shared.csv") == 1 + 7);
  for (const char* f : {"box_by_shared.svg", "version_lines.svg", "theta_sensitivity.csv", "points.csv", "ordering.txt"}) {
    CHECK(std::filesystem::exists(tmp.path() / "full" / f));
  }

  auto partial = rows;
  const auto removed = partial[5].cell;
  partial.erase(partial.begin() + 5);
  const auto pb = emit_report(partial, tmp.path() / "partial");
  REQUIRE(pb.warnings.size() == 1);
  CHECK(pb.warnings[0] == "missing: version=" + std::string(to_string(removed.version)) +
                              " L=" + removed.shared.to_string() + " setting=" + removed.setting() + " seed=0");
  CHECK(std::filesystem::exists(tmp.path() / "partial" / "box_by_shared.csv"));
}

TEST_CASE("ordering respects the tolerance") {
  auto rows = toy_rows();
  for (auto& r : rows) {
    if (r.cell.version == Version::v3) r.metrics.dice -= 0.045;  // v3 now up to 0.005 below v2 on average
  }
  TempDir tmp("report_eps");
  const auto strict = emit_report(rows, tmp.path() / "a", {0.0});
  const auto loose = emit_report(rows, tmp.path() / "b", {0.05});
  auto find = [](const ReportBundle& b) {
    for (const auto& o : b.ordering) {
      if (o.lower == Version::v2) return o;
    }
    return OrderingResult{};
  };
  CHECK(find(loose).holds == 7);
  CHECK(find(strict).holds < 7);
}

TEST_CASE("box statistics use linear quantiles") {
  const auto b = box_stats("g", {4.0, 1.0, 3.0, 2.0});
  CHECK(b.n == 4);
  CHECK(b.min == 1.0);
  CHECK(b.q1 == 1.75);
  CHECK(b.median == 2.5);
  CHECK(b.q3 == 3.25);
  CHECK(b.max == 4.0);
  CHECK(b.mean == 2.5);
}

TEST_CASE("a tiny sweep trains, evaluates and records every cell") {
  TempDir tmp("sweep_run");
  std::vector<MultimodalSample> data;
  PhantomSpec spec;
  spec.shape = {24, 24, 24};
  spec.lesion_radius_mm = {4.0, 6.0};
  spec.organ_radius_mm = {5.0, 7.0};
  spec.organ_count = 1;
  for (uint64_t s = 0; s < 2; ++s) {
    spec.seed = s;
    data.push_back(generate_phantom(spec));
  }
  TrainConfig base;
  base.model.widths = {2, 4, 4, 8, 8};
  base.model.in_patch = {16, 16, 16};
  base.batch_size = 2;
  base.epochs = 1;
  base.val_every = 0;
  const auto grid = custom_grid({Version::v1, Version::v4}, {StageIndexSet{5}}, {Corruption::none},
                                {Theta{}, Theta{0.2, false}}, {0});
  int seen = 0;
  const auto rows = run_sweep(base, grid, data, {}, data, tmp.path(), [&](const SweepRow&) { ++seen; });
  CHECK(seen == 4);
  int ok = 0, skipped = 0;
  for (const auto& r : rows) {
    ok += r.status == "ok";
    skipped += r.status == "skipped";
    if (r.status == "ok") CHECK(std::filesystem::exists(r.history_path));
  }
  CHECK(ok == 2);
  CHECK(skipped == 2);
  CHECK_THROWS(run_sweep(base, grid, data, {}, {}, tmp.path()));
}
