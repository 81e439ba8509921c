#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "coherent/base_forecast.hpp"
#include "coherent/covariance.hpp"
#include "coherent/csv.hpp"
#include "coherent/error.hpp"
#include "coherent/hierarchy.hpp"
#include "coherent/panel.hpp"
#include "coherent/reconcile.hpp"

namespace coherent {

struct ExperimentConfig {
  Period first_train_start;
  Period first_train_end;
  int h_max = 4;
  // "base" plus any of "ols", "wls", "mint_shr".
  std::vector<std::string> methods = {"base", "ols", "wls", "mint_shr"};
  ForecasterConfig forecaster;
  CovarianceSpec covariance;  // method field ignored; one spec per run
  // When set, base forecasts are read from <dir>/<origin>_forecasts.csv and
  // <dir>/<origin>_residuals.csv instead of the built-in forecasters.
  std::optional<std::string> external_base_dir;
};

struct Window {
  int train_begin = 0;  // indices into the panel time axis, inclusive
  int train_end = 0;
  int test_begin = 0;
  int test_end = 0;
  Period origin;  // last training period
};

struct ErrorRecord {
  int window = 0;
  Period origin;
  int horizon = 0;
  std::string method;
  std::string series;
  double error = 0.0;  // actual minus forecast, currency units
};

struct EvaluationReport {
  std::vector<ErrorRecord> per_window_errors;
  // (method, horizon, group) -> pooled MSE over windows and series
  std::map<std::tuple<std::string, int, std::string>, double> mse;
  // skill in percent; absent where mse(base) == 0 (flagged, not divided)
  std::map<std::tuple<std::string, int, std::string>, double> skill;
  std::vector<std::tuple<std::string, int, std::string>> degenerate_groups;
  // (method, horizon, series) -> per-series MSE
  std::map<std::tuple<std::string, int, std::string>, double> mse_series;
  std::vector<std::string> groups;  // deterministic group order
};

/// Percentage reduction in MSE relative to base; positive means improvement.
inline double skill_score(double mse_base, double mse_method) {
  if (!(mse_base > 0.0))
    throw input_error("skill score undefined: base MSE is not positive");
  return 100.0 * (mse_base - mse_method) / mse_base;
}

/// Group label per series in system ordering: the shared top series maps to
/// "top", everything else to "<hierarchy>-aggregates" / "<hierarchy>-bottom".
inline std::vector<std::string> group_series(const LinkedSystem& sys) {
  std::vector<std::string> groups;
  groups.reserve(sys.n);
  groups.push_back("top");
  for (const auto& h : sys.hierarchies) {
    for (int i = 0; i < h.num_aggregates(); ++i)
      groups.push_back(h.name + "-aggregates");
    for (int i = 0; i < h.num_bottoms(); ++i)
      groups.push_back(h.name + "-bottom");
  }
  return groups;
}

/// Window k trains on [first_train_start, first_train_end + k]; each window
/// tests on the following h_max periods. Windows lacking a full test range
/// are dropped.
inline std::vector<Window> expanding_windows(const TimeSeriesPanel& panel,
                                             const ExperimentConfig& cfg) {
  if (cfg.h_max < 1) throw input_error("h_max must be >= 1");
  const int start = panel.time_index(cfg.first_train_start);
  const int end0 = panel.time_index(cfg.first_train_end);
  if (end0 <= start)
    throw input_error("first training window is empty");

  std::vector<Window> out;
  for (int end = end0; end + cfg.h_max < panel.T(); ++end) {
    Window w;
    w.train_begin = start;
    w.train_end = end;
    w.test_begin = end + 1;
    w.test_end = end + cfg.h_max;
    w.origin = panel.times[end];
    out.push_back(w);
  }
  if (out.empty())
    throw input_error("panel too short for a single evaluation window");
  return out;
}

namespace detail {

inline BaseForecastSet window_base_set(const TimeSeriesPanel& train,
                                       const LinkedSystem& sys,
                                       const ExperimentConfig& cfg) {
  if (cfg.external_base_dir) {
    namespace fs = std::filesystem;
    const auto origin = train.times.back().str();
    auto fpath = fs::path(*cfg.external_base_dir) / (origin + "_forecasts.csv");
    auto rpath = fs::path(*cfg.external_base_dir) / (origin + "_residuals.csv");
    auto set = ingest_external(fpath.string(), rpath.string(), sys);
    if (static_cast<int>(set.horizons.size()) < cfg.h_max)
      throw input_error("external base forecasts for origin " + origin +
                        " cover fewer than h_max horizons");
    return set;
  }
  return build_base_set(train, cfg.h_max, cfg.forecaster);
}

}  // namespace detail

/// Expanding-window experiment: per window, fit or ingest base forecasts,
/// estimate W from that window's residuals, reconcile per method, and score
/// errors against held-out actuals.
inline EvaluationReport run_experiment(const TimeSeriesPanel& panel_in,
                                       const LinkedSystem& sys,
                                       const ExperimentConfig& cfg) {
  TimeSeriesPanel panel = align_to_system(panel_in, sys);
  auto windows = expanding_windows(panel, cfg);
  auto groups = group_series(sys);

  bool want_base = false;
  std::vector<WeightMethod> recon_methods;
  for (const auto& m : cfg.methods) {
    if (m == "base")
      want_base = true;
    else
      recon_methods.push_back(parse_weight_method(m));
  }
  if (!want_base)
    throw input_error("methods must include 'base' (skill reference)");

  EvaluationReport report;
  report.groups.push_back("top");
  for (const auto& h : sys.hierarchies) {
    report.groups.push_back(h.name + "-aggregates");
    report.groups.push_back(h.name + "-bottom");
  }
  report.groups.push_back("all");

  // (method, horizon, group/series) -> [sum of squared errors, count]
  std::map<std::tuple<std::string, int, std::string>, std::pair<double, long>> acc_group;
  std::map<std::tuple<std::string, int, std::string>, std::pair<double, long>> acc_series;

  auto record = [&](int window_id, Period origin, const std::string& method,
                    const Eigen::MatrixXd& forecasts,
                    const TimeSeriesPanel& test) {
    for (int h = 1; h <= cfg.h_max; ++h) {
      for (int s = 0; s < sys.n; ++s) {
        double err = test.values(h - 1, s) - forecasts(h - 1, s);
        report.per_window_errors.push_back(
            {window_id, origin, h, method, sys.ordering[s], err});
        double sq = err * err;
        auto add = [&](auto& acc, const std::string& key) {
          auto& cell = acc[{method, h, key}];
          cell.first += sq;
          cell.second += 1;
        };
        add(acc_group, groups[s]);
        add(acc_group, "all");
        add(acc_series, sys.ordering[s]);
      }
    }
  };

  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    TimeSeriesPanel train = panel.slice(w.train_begin, w.train_end);
    TimeSeriesPanel test = panel.slice(w.test_begin, w.test_end);
    BaseForecastSet base;
    try {
      base = detail::window_base_set(train, sys, cfg);

      record(static_cast<int>(k), w.origin, "base", base.forecasts, test);
      for (auto wm : recon_methods) {
        CovarianceSpec cov = cfg.covariance;
        cov.method = wm;
        auto W = make_weight_matrix(base.residuals, cov, sys.n);
        auto rec = reconcile_batch(base, sys, W);
        record(static_cast<int>(k), w.origin, weight_method_name(wm),
               rec.y_tilde, test);
      }
    } catch (const error& e) {
      throw error("window " + std::to_string(k) + " (origin " +
                  w.origin.str() + ") failed: " + e.what());
    }
  }

  for (const auto& [key, cell] : acc_group)
    report.mse[key] = cell.first / static_cast<double>(cell.second);
  for (const auto& [key, cell] : acc_series)
    report.mse_series[key] = cell.first / static_cast<double>(cell.second);

  for (const auto& [key, value] : report.mse) {
    const auto& [method, h, group] = key;
    double base_mse = report.mse.at({"base", h, group});
    if (base_mse > 0.0)
      report.skill[key] = skill_score(base_mse, value);
    else
      report.degenerate_groups.push_back(key);
  }
  return report;
}

inline void write_report(const EvaluationReport& report,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  csv::Writer mse((fs::path(out_dir) / "mse.csv").string());
  mse.row({"method", "horizon", "group", "mse"});
  for (const auto& [key, v] : report.mse) {
    const auto& [method, h, group] = key;
    mse.row({method, std::to_string(h), group, csv::format_value(v)});
  }

  csv::Writer skill((fs::path(out_dir) / "skill.csv").string());
  skill.row({"method", "horizon", "group", "skill_pct"});
  for (const auto& [key, v] : report.skill) {
    const auto& [method, h, group] = key;
    skill.row({method, std::to_string(h), group, csv::format_value(v)});
  }

  csv::Writer mses((fs::path(out_dir) / "mse_series.csv").string());
  mses.row({"method", "horizon", "series", "mse"});
  for (const auto& [key, v] : report.mse_series) {
    const auto& [method, h, series] = key;
    mses.row({method, std::to_string(h), series, csv::format_value(v)});
  }

  csv::Writer errs((fs::path(out_dir) / "errors.csv").string());
  errs.row({"window", "origin", "horizon", "method", "series", "error"});
  for (const auto& r : report.per_window_errors)
    errs.row({std::to_string(r.window), r.origin.str(), std::to_string(r.horizon),
              r.method, r.series, csv::format_value(r.error)});
}

}  // namespace coherent
