#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "coherent/csv.hpp"
#include "coherent/error.hpp"
#include "coherent/hierarchy.hpp"
#include "coherent/period.hpp"

namespace coherent {

/// A complete panel: every series observed at every period, no gaps.
struct TimeSeriesPanel {
  std::vector<std::string> series_names;
  std::vector<Period> times;
  Eigen::MatrixXd values;  // T x n

  int T() const { return static_cast<int>(times.size()); }
  int n() const { return static_cast<int>(series_names.size()); }

  int time_index(Period p) const {
    for (int t = 0; t < T(); ++t)
      if (times[t] == p) return t;
    throw input_error("period " + p.str() + " not in panel");
  }

  /// Rows [t0, t1] inclusive.
  TimeSeriesPanel slice(int t0, int t1) const {
    TimeSeriesPanel out;
    out.series_names = series_names;
    out.times.assign(times.begin() + t0, times.begin() + t1 + 1);
    out.values = values.middleRows(t0, t1 - t0 + 1);
    return out;
  }
};

/// Loads a long-format panel CSV with columns series,period,value.
/// Series are ordered by first encounter, periods sorted ascending.
inline TimeSeriesPanel load_panel(const std::string& path) {
  auto table = csv::read_file(path);
  const int c_series = table.column("series");
  const int c_period = table.column("period");
  const int c_value = table.column("value");

  TimeSeriesPanel panel;
  std::map<std::string, int> series_idx;
  std::map<Period, int> time_idx;
  std::vector<std::tuple<int, Period, double>> cells;
  for (const auto& row : table.rows) {
    const auto& name = row[c_series];
    auto [it, inserted] = series_idx.try_emplace(name, panel.n());
    if (inserted) panel.series_names.push_back(name);
    Period p = Period::parse(row[c_period]);
    time_idx.try_emplace(p, 0);
    double v = csv::parse_double(row[c_value]);
    if (!std::isfinite(v))
      throw input_error("non-finite value for " + name + " at " + p.str());
    cells.emplace_back(it->second, p, v);
  }
  if (cells.empty()) throw input_error("panel file has no data rows: " + path);

  int t = 0;
  for (auto& [p, idx] : time_idx) {
    idx = t++;
    panel.times.push_back(p);
  }
  for (int i = 1; i < panel.T(); ++i)
    if (panel.times[i] - panel.times[i - 1] != 1)
      throw input_error("panel has a gap between " + panel.times[i - 1].str() +
                        " and " + panel.times[i].str());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  panel.values = Eigen::MatrixXd::Constant(panel.T(), panel.n(), nan);
  for (const auto& [s, p, v] : cells) {
    double& cell = panel.values(time_idx.at(p), s);
    if (std::isfinite(cell))
      throw input_error("duplicate observation for " + panel.series_names[s] +
                        " at " + p.str());
    cell = v;
  }
  for (int t2 = 0; t2 < panel.T(); ++t2)
    for (int s = 0; s < panel.n(); ++s)
      if (!std::isfinite(panel.values(t2, s)))
        throw input_error("missing observation for " + panel.series_names[s] +
                          " at " + panel.times[t2].str());
  return panel;
}

inline void write_panel(const TimeSeriesPanel& panel, const std::string& path) {
  csv::Writer w(path);
  w.row({"series", "period", "value"});
  for (int s = 0; s < panel.n(); ++s)
    for (int t = 0; t < panel.T(); ++t)
      w.row({panel.series_names[s], panel.times[t].str(),
             csv::format_value(panel.values(t, s))});
}

/// Reorders panel columns to match the system ordering. Every system series
/// must be present; extras are rejected.
inline TimeSeriesPanel align_to_system(const TimeSeriesPanel& panel,
                                       const LinkedSystem& sys) {
  if (panel.n() != sys.n)
    throw input_error("panel has " + std::to_string(panel.n()) +
                      " series, system has " + std::to_string(sys.n));
  std::map<std::string, int> have;
  for (int s = 0; s < panel.n(); ++s) have[panel.series_names[s]] = s;

  TimeSeriesPanel out;
  out.series_names = sys.ordering;
  out.times = panel.times;
  out.values.resize(panel.T(), sys.n);
  for (int j = 0; j < sys.n; ++j) {
    auto it = have.find(sys.ordering[j]);
    if (it == have.end())
      throw input_error("panel is missing series '" + sys.ordering[j] + "'");
    out.values.col(j) = panel.values.col(it->second);
  }
  return out;
}

/// Max |U_full y_t| scaled by max(1, ||y_t||_inf), one value per period.
inline std::vector<double> check_coherence(const TimeSeriesPanel& panel,
                                           const LinkedSystem& sys) {
  if (panel.n() != sys.n)
    throw input_error("check_coherence: panel has " + std::to_string(panel.n()) +
                      " series, system has " + std::to_string(sys.n));
  std::vector<double> out(panel.T());
  for (int t = 0; t < panel.T(); ++t) {
    Eigen::VectorXd y = panel.values.row(t).transpose();
    double scale = std::max(1.0, y.lpNorm<Eigen::Infinity>());
    out[t] = (sys.U_full * y).lpNorm<Eigen::Infinity>() / scale;
  }
  return out;
}

}  // namespace coherent
