// Command-line front end: validate coherent panels, reconcile base
// forecasts, and run the expanding-window evaluation experiment.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coherent/base_forecast.hpp"
#include "coherent/covariance.hpp"
#include "coherent/evaluation.hpp"
#include "coherent/hierarchy.hpp"
#include "coherent/panel.hpp"
#include "coherent/reconcile.hpp"

namespace fs = std::filesystem;
using namespace coherent;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SharedOptions {
  std::vector<std::string> hierarchy_paths;
  std::string top;
  std::string data_path;
  std::string out_dir = ".";
  double tol = 1e-6;
  unsigned long seed = 0;
};

LinkedSystem load_system(const SharedOptions& opts) {
  if (opts.hierarchy_paths.empty())
    throw input_error("at least one --hierarchy file is required");
  std::vector<HierarchySpec> specs;
  for (const auto& path : opts.hierarchy_paths)
    specs.push_back(parse_hierarchy_spec(read_text_file(path)));
  std::string top = opts.top.empty() ? specs.front().top : opts.top;
  return link_hierarchies(specs, top);
}

void add_shared(CLI::App* cmd, SharedOptions& opts) {
  cmd->add_option("--hierarchy", opts.hierarchy_paths,
                  "Hierarchy spec file (repeat once per side)");
  cmd->add_option("--top", opts.top, "Name of the shared top series");
  cmd->add_option("--data", opts.data_path, "Panel CSV (series,period,value)");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--tol", opts.tol, "Relative coherence tolerance");
  cmd->add_option("--seed", opts.seed, "Random seed (recorded in metadata)");
}

void write_metadata(const std::string& out_dir, const nlohmann::json& cfg) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "run_meta.json");
  nlohmann::json meta = cfg;
  meta["version"] = kVersion;
  out << meta.dump(2) << "\n";
}

int cmd_validate(const SharedOptions& opts) {
  auto sys = load_system(opts);
  auto panel = align_to_system(load_panel(opts.data_path), sys);
  auto violations = check_coherence(panel, sys);

  std::cout << "n=" << sys.n << " K=" << sys.K << "\n";
  std::cout << "groups: top=1";
  for (const auto& h : sys.hierarchies)
    std::cout << " " << h.name << "-aggregates=" << h.num_aggregates() << " "
              << h.name << "-bottom=" << h.num_bottoms();
  std::cout << "\n";

  double worst = 0.0;
  int first_bad = -1;
  for (std::size_t t = 0; t < violations.size(); ++t) {
    std::cout << panel.times[t].str() << " max_violation="
              << csv::format_value(violations[t]) << "\n";
    worst = std::max(worst, violations[t]);
    if (first_bad < 0 && violations[t] > opts.tol) first_bad = static_cast<int>(t);
  }
  if (first_bad >= 0) {
    std::cerr << "coherence violation " << csv::format_value(violations[first_bad])
              << " at " << panel.times[first_bad].str() << " exceeds tol "
              << opts.tol << "\n";
    return kExitValidation;
  }
  std::cout << "coherent within tol " << opts.tol << " (max "
            << csv::format_value(worst) << ")\n";
  return kExitOk;
}

struct ReconcileOptions {
  std::string method = "mint-shr";
  std::string base_path;
  std::string residual_path;
  std::optional<double> lambda;
  bool dump_w = false;
  std::string forecaster = "naive";
  int horizons = 4;
};

int cmd_reconcile(const SharedOptions& opts, const ReconcileOptions& ropts) {
  auto sys = load_system(opts);

  BaseForecastSet base;
  if (!ropts.base_path.empty()) {
    if (ropts.residual_path.empty())
      throw input_error("--base requires --residuals");
    base = ingest_external(ropts.base_path, ropts.residual_path, sys);
  } else if (!opts.data_path.empty()) {
    auto panel = align_to_system(load_panel(opts.data_path), sys);
    ForecasterConfig fc;
    fc.method = parse_forecast_method(ropts.forecaster);
    base = build_base_set(panel, ropts.horizons, fc);
  } else {
    throw input_error("either --base/--residuals or --data is required");
  }

  CovarianceSpec cov;
  cov.method = parse_weight_method(ropts.method);
  cov.lambda_override = ropts.lambda;
  auto W = make_weight_matrix(base.residuals, cov, sys.n);
  auto result = reconcile_batch(base, sys, W);

  fs::create_directories(opts.out_dir);
  {
    csv::Writer w((fs::path(opts.out_dir) / "reconciled.csv").string());
    w.row({"series", "horizon", "value"});
    for (int s = 0; s < sys.n; ++s)
      for (std::size_t h = 0; h < base.horizons.size(); ++h)
        w.row({sys.ordering[s], std::to_string(base.horizons[h]),
               csv::format_value(result.y_tilde(h, s))});
  }
  {
    csv::Writer w((fs::path(opts.out_dir) / "violations.csv").string());
    w.row({"horizon", "max_violation"});
    for (std::size_t h = 0; h < result.max_constraint_violation.size(); ++h)
      w.row({std::to_string(base.horizons[h]),
             csv::format_value(result.max_constraint_violation[h])});
  }
  if (ropts.dump_w) {
    csv::Writer w((fs::path(opts.out_dir) / "w.csv").string());
    std::vector<std::string> header{"series"};
    for (const auto& name : sys.ordering) header.push_back(name);
    w.row(header);
    for (int i = 0; i < sys.n; ++i) {
      std::vector<std::string> row{sys.ordering[i]};
      for (int j = 0; j < sys.n; ++j)
        row.push_back(csv::format_value(W.W(i, j)));
      w.row(row);
    }
  }

  nlohmann::json meta;
  meta["subcommand"] = "reconcile";
  meta["method"] = ropts.method;
  meta["seed"] = opts.seed;
  if (cov.method == WeightMethod::mint_shr) meta["lambda"] = W.lambda;
  write_metadata(opts.out_dir, meta);
  return kExitOk;
}

struct EvaluateOptions {
  std::string first_train_start;
  std::string first_train_end;
  int horizons = 4;
  std::vector<std::string> methods = {"base", "ols", "wls", "mint_shr"};
  std::string forecaster = "naive";
  std::string external_base_dir;
};

int cmd_evaluate(const SharedOptions& opts, const EvaluateOptions& eopts) {
  auto sys = load_system(opts);
  auto panel = align_to_system(load_panel(opts.data_path), sys);

  ExperimentConfig cfg;
  cfg.first_train_start = eopts.first_train_start.empty()
                              ? panel.times.front()
                              : Period::parse(eopts.first_train_start);
  cfg.first_train_end = Period::parse(eopts.first_train_end);
  cfg.h_max = eopts.horizons;
  cfg.methods = eopts.methods;
  cfg.forecaster.method = parse_forecast_method(eopts.forecaster);
  if (!eopts.external_base_dir.empty())
    cfg.external_base_dir = eopts.external_base_dir;

  auto report = run_experiment(panel, sys, cfg);
  write_report(report, opts.out_dir);

  nlohmann::json meta;
  meta["subcommand"] = "evaluate";
  meta["first_train_start"] = cfg.first_train_start.str();
  meta["first_train_end"] = cfg.first_train_end.str();
  meta["horizons"] = cfg.h_max;
  meta["methods"] = eopts.methods;
  meta["forecaster"] = eopts.forecaster;
  meta["seed"] = opts.seed;
  write_metadata(opts.out_dir, meta);

  for (const auto& key : report.degenerate_groups) {
    const auto& [method, h, group] = key;
    std::cerr << "warning: base MSE is zero for group " << group
              << " at horizon " << h << "; skill undefined\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherent point forecasts for linked hierarchies of time series"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Config file with one `key=value` per line "
                                 "(command-line flags win on conflict)");
  app.require_subcommand(1);

  SharedOptions shared;
  ReconcileOptions ropts;
  EvaluateOptions eopts;

  auto* validate = app.add_subcommand("validate",
                                      "Check a panel against the aggregation constraints");
  add_shared(validate, shared);

  auto* reconcile = app.add_subcommand("reconcile",
                                       "Reconcile base forecasts onto the coherent subspace");
  add_shared(reconcile, shared);
  reconcile->add_option("--method", ropts.method, "ols|wls|mint-shr");
  reconcile->add_option("--base", ropts.base_path, "Base forecast CSV (series,horizon,value)");
  reconcile->add_option("--residuals", ropts.residual_path,
                        "Residual CSV (series,period,value)");
  reconcile->add_option("--lambda", ropts.lambda, "Shrinkage intensity override in [0,1]");
  reconcile->add_flag("--dump-w", ropts.dump_w, "Dump the weight matrix as dense CSV");
  reconcile->add_option("--forecaster", ropts.forecaster,
                        "naive|rw-drift|ar (used with --data)");
  reconcile->add_option("--horizons", ropts.horizons, "Forecast horizons (used with --data)");

  auto* evaluate = app.add_subcommand("evaluate",
                                      "Run the expanding-window evaluation experiment");
  add_shared(evaluate, shared);
  evaluate->add_option("--first-train-start", eopts.first_train_start,
                       "First training period (default: panel start)");
  evaluate->add_option("--first-train-end", eopts.first_train_end,
                       "Last period of the first training window")
      ->required();
  evaluate->add_option("--horizons", eopts.horizons, "Max forecast horizon");
  evaluate->add_option("--methods", eopts.methods,
                       "Subset of base,ols,wls,mint_shr (base required)");
  evaluate->add_option("--forecaster", eopts.forecaster, "naive|rw-drift|ar");
  evaluate->add_option("--external-base-dir", eopts.external_base_dir,
                       "Directory of per-origin external base forecast files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(shared);
    if (reconcile->parsed()) return cmd_reconcile(shared, ropts);
    if (evaluate->parsed()) return cmd_evaluate(shared, eopts);
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
