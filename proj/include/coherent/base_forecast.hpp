#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coherent/csv.hpp"
#include "coherent/error.hpp"
#include "coherent/panel.hpp"

namespace coherent {

enum class ForecastMethod { naive, rw_drift, ar };

inline ForecastMethod parse_forecast_method(const std::string& s) {
  if (s == "naive") return ForecastMethod::naive;
  if (s == "rw-drift" || s == "rw_drift") return ForecastMethod::rw_drift;
  if (s == "ar") return ForecastMethod::ar;
  throw input_error("unknown forecaster '" + s + "'");
}

struct ForecasterConfig {
  ForecastMethod method = ForecastMethod::naive;
  int ar_max_order = 4;
  // 0 selects the order by AICc over 1..ar_max_order; otherwise fixed.
  int ar_order = 0;
};

/// Base point forecasts for every series plus the in-sample one-step-ahead
/// residual panel used for covariance estimation.
struct BaseForecastSet {
  std::vector<std::string> series_names;
  std::vector<int> horizons;   // 1..H
  Eigen::MatrixXd forecasts;   // H x n
  Eigen::MatrixXd residuals;   // T_r x n
  Period origin;               // last period of the training sample
};

struct UnivariateForecast {
  Eigen::VectorXd forecasts;  // h = 1..h_max
  Eigen::VectorXd residuals;  // in-sample one-step-ahead errors
};

namespace detail {

struct ArFit {
  int order = 0;
  Eigen::VectorXd coef;  // [intercept, phi_1..phi_p]
  Eigen::VectorXd residuals;
  double aicc = std::numeric_limits<double>::infinity();
};

/// Conditional least squares AR(p) with intercept.
inline ArFit fit_ar(const Eigen::VectorXd& y, int p) {
  const int T = static_cast<int>(y.size());
  const int rows = T - p;
  Eigen::MatrixXd X(rows, p + 1);
  Eigen::VectorXd target(rows);
  for (int t = p; t < T; ++t) {
    X(t - p, 0) = 1.0;
    for (int j = 1; j <= p; ++j) X(t - p, j) = y(t - j);
    target(t - p) = y(t);
  }
  ArFit fit;
  fit.order = p;
  fit.coef = X.colPivHouseholderQr().solve(target);
  fit.residuals = target - X * fit.coef;

  const double sse = fit.residuals.squaredNorm();
  const double n_eff = rows;
  const double k = p + 2;  // intercept + p coefficients + variance
  if (n_eff > k + 1) {
    double sig = std::max(sse / n_eff, 1e-300);
    fit.aicc = n_eff * std::log(sig) + 2 * k + 2 * k * (k + 1) / (n_eff - k - 1);
  }
  return fit;
}

}  // namespace detail

/// Point forecasts for h = 1..h_max plus one-step in-sample residuals.
///   naive:    flat at the last observation; residuals are first differences.
///   rw_drift: last observation plus h times the average historical increment;
///             residuals use the drift estimated from data through t-1 only.
///   ar:       AR(p) by conditional least squares, iterated multi-step.
inline UnivariateForecast forecast_univariate(const Eigen::VectorXd& series,
                                              int h_max,
                                              const ForecasterConfig& config) {
  const int T = static_cast<int>(series.size());
  if (h_max < 1) throw input_error("h_max must be positive");
  if (!series.allFinite()) throw input_error("series contains non-finite values");
  if (config.ar_max_order < 1) throw input_error("ar_max_order must be >= 1");

  UnivariateForecast out;
  out.forecasts.resize(h_max);

  switch (config.method) {
    case ForecastMethod::naive: {
      if (T < 3) throw input_error("series too short for naive forecaster");
      out.forecasts.setConstant(series(T - 1));
      out.residuals.resize(T - 1);
      for (int t = 1; t < T; ++t) out.residuals(t - 1) = series(t) - series(t - 1);
      return out;
    }
    case ForecastMethod::rw_drift: {
      if (T < 3) throw input_error("series too short for rw-drift forecaster");
      const double drift = (series(T - 1) - series(0)) / (T - 1);
      for (int h = 1; h <= h_max; ++h)
        out.forecasts(h - 1) = series(T - 1) + h * drift;
      out.residuals.resize(T - 2);
      for (int t = 2; t < T; ++t) {
        double d = (series(t - 1) - series(0)) / (t - 1);
        out.residuals(t - 2) = series(t) - (series(t - 1) + d);
      }
      return out;
    }
    case ForecastMethod::ar: {
      detail::ArFit best;
      if (config.ar_order > 0) {
        if (T < 2 * config.ar_order + 2)
          throw input_error("series too short for ar(" +
                            std::to_string(config.ar_order) + ")");
        best = detail::fit_ar(series, config.ar_order);
      } else {
        // AICc selection, ties broken toward the smaller order.
        for (int p = 1; p <= config.ar_max_order; ++p) {
          if (T < 2 * p + 2) break;
          auto fit = detail::fit_ar(series, p);
          if (fit.aicc < best.aicc) best = fit;
        }
        if (best.order == 0)
          throw input_error("series too short for ar forecaster");
      }
      Eigen::VectorXd extended(T + h_max);
      extended.head(T) = series;
      for (int h = 0; h < h_max; ++h) {
        double v = best.coef(0);
        for (int j = 1; j <= best.order; ++j)
          v += best.coef(j) * extended(T + h - j);
        extended(T + h) = v;
      }
      out.forecasts = extended.tail(h_max);
      out.residuals = best.residuals;
      return out;
    }
  }
  throw input_error("unreachable forecaster method");
}

/// Applies forecast_univariate independently per series. Residual rows are
/// aligned on the common fit sample (trailing rows, all ending at the last
/// training period).
inline BaseForecastSet build_base_set(const TimeSeriesPanel& panel, int h_max,
                                      const ForecasterConfig& config) {
  BaseForecastSet set;
  set.series_names = panel.series_names;
  for (int h = 1; h <= h_max; ++h) set.horizons.push_back(h);
  set.origin = panel.times.back();
  set.forecasts.resize(h_max, panel.n());

  std::vector<Eigen::VectorXd> res(panel.n());
  int common = std::numeric_limits<int>::max();
  for (int s = 0; s < panel.n(); ++s) {
    auto uf = forecast_univariate(panel.values.col(s), h_max, config);
    set.forecasts.col(s) = uf.forecasts;
    res[s] = std::move(uf.residuals);
    common = std::min(common, static_cast<int>(res[s].size()));
  }
  if (common < 2) throw input_error("fewer than 2 residual rows available");
  set.residuals.resize(common, panel.n());
  for (int s = 0; s < panel.n(); ++s)
    set.residuals.col(s) = res[s].tail(common);
  return set;
}

inline void write_base_set(const BaseForecastSet& set,
                           const std::string& forecast_path,
                           const std::string& residual_path) {
  csv::Writer fw(forecast_path);
  fw.row({"series", "horizon", "value"});
  for (std::size_t s = 0; s < set.series_names.size(); ++s)
    for (std::size_t h = 0; h < set.horizons.size(); ++h)
      fw.row({set.series_names[s], std::to_string(set.horizons[h]),
              csv::format_value(set.forecasts(h, s))});

  csv::Writer rw(residual_path);
  rw.row({"series", "period", "value"});
  const int T_r = static_cast<int>(set.residuals.rows());
  for (std::size_t s = 0; s < set.series_names.size(); ++s)
    for (int t = 0; t < T_r; ++t) {
      Period p = set.origin - (T_r - 1 - t);
      rw.row({set.series_names[s], p.str(),
              csv::format_value(set.residuals(t, s))});
    }
}

/// Reads externally produced base forecasts and residuals, reorders both to
/// the system ordering, and validates coverage and finiteness.
inline BaseForecastSet ingest_external(const std::string& forecast_path,
                                       const std::string& residual_path,
                                       const LinkedSystem& sys) {
  auto ftab = csv::read_file(forecast_path);
  const int fc_series = ftab.column("series");
  const int fc_horizon = ftab.column("horizon");
  const int fc_value = ftab.column("value");

  auto idx = ordering_index(sys);
  std::map<std::pair<int, int>, double> fc;  // (horizon, series) -> value
  int h_max = 0;
  for (const auto& row : ftab.rows) {
    auto it = idx.find(row[fc_series]);
    if (it == idx.end())
      throw input_error("forecast file has unknown series '" + row[fc_series] + "'");
    int h = static_cast<int>(csv::parse_long(row[fc_horizon]));
    if (h < 1) throw input_error("horizon must be positive, got " + row[fc_horizon]);
    double v = csv::parse_double(row[fc_value]);
    if (!std::isfinite(v))
      throw input_error("non-finite forecast for '" + row[fc_series] + "'");
    if (!fc.emplace(std::make_pair(h, it->second), v).second)
      throw input_error("duplicate forecast for '" + row[fc_series] +
                        "' at horizon " + std::to_string(h));
    h_max = std::max(h_max, h);
  }

  BaseForecastSet set;
  set.series_names = sys.ordering;
  for (int h = 1; h <= h_max; ++h) set.horizons.push_back(h);
  set.forecasts.resize(h_max, sys.n);
  for (int h = 1; h <= h_max; ++h)
    for (int s = 0; s < sys.n; ++s) {
      auto it = fc.find({h, s});
      if (it == fc.end())
        throw input_error("forecast file missing series '" + sys.ordering[s] +
                          "' at horizon " + std::to_string(h));
      set.forecasts(h - 1, s) = it->second;
    }

  // Residuals arrive as a long panel; reuse the panel loader semantics.
  auto rtab = csv::read_file(residual_path);
  const int rc_series = rtab.column("series");
  const int rc_period = rtab.column("period");
  const int rc_value = rtab.column("value");
  std::map<std::pair<Period, int>, double> rc;  // (period, series) -> value
  std::set<Period> periods;
  for (const auto& row : rtab.rows) {
    auto it = idx.find(row[rc_series]);
    if (it == idx.end())
      throw input_error("residual file has unknown series '" + row[rc_series] + "'");
    Period p = Period::parse(row[rc_period]);
    periods.insert(p);
    double v = csv::parse_double(row[rc_value]);
    if (!std::isfinite(v))
      throw input_error("non-finite residual for '" + row[rc_series] + "'");
    if (!rc.emplace(std::make_pair(p, it->second), v).second)
      throw input_error("duplicate residual for '" + row[rc_series] + "' at " +
                        p.str());
  }
  std::vector<Period> times(periods.begin(), periods.end());
  if (times.size() < 2) throw input_error("residual file has fewer than 2 periods");
  set.origin = times.back();
  set.residuals.resize(times.size(), sys.n);
  for (std::size_t ti = 0; ti < times.size(); ++ti)
    for (int s = 0; s < sys.n; ++s) {
      auto it = rc.find({times[ti], s});
      if (it == rc.end())
        throw input_error("residual file missing series '" + sys.ordering[s] +
                          "' at " + times[ti].str());
      set.residuals(ti, s) = it->second;
    }
  return set;
}

}  // namespace coherent
