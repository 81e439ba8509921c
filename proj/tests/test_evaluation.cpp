#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "coherent/evaluation.hpp"
#include "test_support.hpp"

using namespace coherent;
namespace ts = test_support;
namespace fs = std::filesystem;

namespace {

LinkedSystem two_sided_system() {
  HierarchySpec a, b;
  a.name = "left";
  a.top = "Top";
  a.edges = {{"Top", "LA1"}, {"LA1", "LB1"}, {"LA1", "LB2"},
             {"Top", "LA2"}, {"LA2", "LB3"}, {"LA2", "LB4"}};
  b.name = "right";
  b.top = "Top";
  b.edges = {{"Top", "RA1"}, {"RA1", "RB1"}, {"RA1", "RB2"}, {"RA1", "RB3"},
             {"Top", "RA2"}, {"RA2", "RB4"}, {"RA2", "RB5"}, {"RA2", "RB6"}};
  return link_hierarchies({a, b}, "Top");
}

}  // namespace

TEST_CASE("skill score arithmetic") {
  CHECK(skill_score(4, 3) == Catch::Approx(25.0));
  CHECK(skill_score(4, 4) == 0.0);
  CHECK(skill_score(4, 5) == Catch::Approx(-25.0));
  CHECK_THROWS_AS(skill_score(0, 1), input_error);
}

TEST_CASE("series groups partition the system") {
  auto sys = two_sided_system();
  auto groups = group_series(sys);
  REQUIRE(static_cast<int>(groups.size()) == sys.n);
  CHECK(groups[0] == "top");
  std::map<std::string, int> counts;
  for (const auto& g : groups) counts[g]++;
  CHECK(counts["top"] == 1);
  CHECK(counts["left-aggregates"] == 2);
  CHECK(counts["left-bottom"] == 4);
  CHECK(counts["right-aggregates"] == 2);
  CHECK(counts["right-bottom"] == 6);
}

TEST_CASE("expanding window counting") {
  std::mt19937_64 rng(1);
  auto sys = two_sided_system();

  SECTION("boundary: exactly one window") {
    auto panel = ts::random_coherent_panel(rng, sys, 44, Period(1984, 4));
    ExperimentConfig cfg;
    cfg.first_train_start = panel.times.front();
    cfg.first_train_end = panel.times[39];
    cfg.h_max = 4;
    auto windows = expanding_windows(panel, cfg);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].train_end - windows[0].train_begin + 1 == 40);
  }

  SECTION("five windows with growing training sets") {
    auto panel = ts::random_coherent_panel(rng, sys, 48, Period(1984, 4));
    ExperimentConfig cfg;
    cfg.first_train_start = panel.times.front();
    cfg.first_train_end = panel.times[39];
    cfg.h_max = 4;
    auto windows = expanding_windows(panel, cfg);
    REQUIRE(windows.size() == 5);
    for (std::size_t k = 0; k < windows.size(); ++k) {
      CHECK(windows[k].train_end - windows[k].train_begin + 1 ==
            40 + static_cast<int>(k));
      CHECK(windows[k].train_begin == 0);
      if (k > 0) CHECK(windows[k].origin > windows[k - 1].origin);
    }
  }

  SECTION("paper calendar: test origins 1994:Q3 through 2017:Q4") {
    // 1984:Q4 .. 2018:Q4 inclusive
    int T = Period(2018, 4) - Period(1984, 4) + 1;
    auto panel = ts::random_coherent_panel(rng, sys, T, Period(1984, 4));
    ExperimentConfig cfg;
    cfg.first_train_start = Period(1984, 4);
    cfg.first_train_end = Period(1994, 3);
    cfg.h_max = 4;
    auto windows = expanding_windows(panel, cfg);
    CHECK(windows.front().origin == Period(1994, 3));
    CHECK(windows.back().origin == Period(2017, 4));
    CHECK(panel.times[windows.back().test_end] == Period(2018, 4));
  }
}

TEST_CASE("base-only run yields an all-zero skill table") {
  std::mt19937_64 rng(2);
  auto sys = two_sided_system();
  auto panel = ts::random_coherent_panel(rng, sys, 30, Period(2000, 1), 20.0);
  ExperimentConfig cfg;
  cfg.first_train_start = panel.times.front();
  cfg.first_train_end = panel.times[19];
  cfg.h_max = 2;
  cfg.methods = {"base"};
  auto report = run_experiment(panel, sys, cfg);
  REQUIRE(!report.skill.empty());
  for (const auto& [key, v] : report.skill) CHECK(v == 0.0);
}

TEST_CASE("constant panel: zero base MSE is flagged, not divided") {
  auto sys = two_sided_system();
  TimeSeriesPanel panel;
  panel.series_names = sys.ordering;
  for (int t = 0; t < 20; ++t) {
    panel.times.push_back(Period(2000, 1) + t);
  }
  panel.values.resize(20, sys.n);
  std::mt19937_64 rng(3);
  Eigen::VectorXd y = ts::random_coherent_vector(rng, sys, 5.0);
  for (int t = 0; t < 20; ++t) panel.values.row(t) = y.transpose();

  ExperimentConfig cfg;
  cfg.first_train_start = panel.times.front();
  cfg.first_train_end = panel.times[14];
  cfg.h_max = 2;
  cfg.methods = {"base", "ols"};
  auto report = run_experiment(panel, sys, cfg);
  CHECK(report.skill.empty());
  CHECK(!report.degenerate_groups.empty());
  // base errors are exactly zero; reconciled ones only up to round-off
  for (const auto& [key, v] : report.mse) {
    if (std::get<0>(key) == "base")
      CHECK(v == 0.0);
    else
      CHECK(v <= 1e-18);
  }
}

TEST_CASE("error bookkeeping reproduces the base MSE exactly") {
  std::mt19937_64 rng(5);
  auto sys = two_sided_system();
  auto panel = ts::random_coherent_panel(rng, sys, 36, Period(1990, 1), 50.0);
  ExperimentConfig cfg;
  cfg.first_train_start = panel.times.front();
  cfg.first_train_end = panel.times[23];
  cfg.h_max = 3;
  auto report = run_experiment(panel, sys, cfg);

  // re-aggregate per_window_errors for base, group "all"
  std::map<int, std::pair<double, long>> acc;
  for (const auto& r : report.per_window_errors)
    if (r.method == "base") {
      acc[r.horizon].first += r.error * r.error;
      acc[r.horizon].second += 1;
    }
  for (const auto& [h, cell] : acc) {
    double mse = cell.first / static_cast<double>(cell.second);
    CHECK(report.mse.at({"base", h, "all"}) == mse);
  }

  // sign convention: improvement iff mse_method < mse_base
  for (const auto& [key, v] : report.skill) {
    const auto& [method, h, group] = key;
    double base = report.mse.at({"base", h, group});
    double own = report.mse.at(key);
    if (own < base) CHECK(v > 0.0);
    if (own > base) CHECK(v < 0.0);
  }
}

TEST_CASE("runs are deterministic") {
  std::mt19937_64 rng(6);
  auto sys = two_sided_system();
  auto panel = ts::random_coherent_panel(rng, sys, 32, Period(1990, 1), 50.0);
  // incoherent noise so reconciliation has work to do
  std::mt19937_64 rng2(7);
  for (int t = 0; t < panel.T(); ++t)
    panel.values.row(t) += ts::random_vector(rng2, sys.n, 0.5).transpose();

  ExperimentConfig cfg;
  cfg.first_train_start = panel.times.front();
  cfg.first_train_end = panel.times[23];
  cfg.h_max = 2;

  auto r1 = run_experiment(panel, sys, cfg);
  auto r2 = run_experiment(panel, sys, cfg);
  CHECK(r1.mse == r2.mse);
  CHECK(r1.skill == r2.skill);

  auto dir1 = fs::temp_directory_path() / "coherent_eval_det1";
  auto dir2 = fs::temp_directory_path() / "coherent_eval_det2";
  write_report(r1, dir1.string());
  write_report(r2, dir2.string());
  for (const char* name : {"mse.csv", "skill.csv", "mse_series.csv", "errors.csv"}) {
    std::ifstream a(dir1 / name), b(dir2 / name);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(!sa.str().empty());
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("reconciliation with the true W helps the noisy top series") {
  // Monte Carlo over many windows: coherent signal plus independent noise,
  // mint_shr with plenty of residuals should improve the top series.
  std::mt19937_64 rng(8);
  auto sys = two_sided_system();
  const int T = 120;
  auto panel = ts::random_coherent_panel(rng, sys, T, Period(1980, 1), 0.0);
  // constant coherent level plus iid noise per series
  std::mt19937_64 noise_rng(9);
  Eigen::VectorXd level = ts::random_coherent_vector(rng, sys, 100.0);
  for (int t = 0; t < T; ++t)
    panel.values.row(t) =
        (level + ts::random_vector(noise_rng, sys.n, 1.0)).transpose();

  ExperimentConfig cfg;
  cfg.first_train_start = panel.times.front();
  cfg.first_train_end = panel.times[59];
  cfg.h_max = 1;
  cfg.methods = {"base", "wls"};
  auto report = run_experiment(panel, sys, cfg);
  CHECK(report.skill.at({"wls", 1, "top"}) > 0.0);
}
