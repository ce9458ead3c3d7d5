#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../metrics.hpp"
#include "config.hpp"
#include "experiment.hpp"
#include "report_io.hpp"

namespace sde_sindy::harness {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2 };

/// Published experimental settings for a built-in model.
struct ZooSettings {
  ZooModel model;
  std::string drift_dictionary;
  std::string diffusion_dictionary;
  double lambda_drift;
  double lambda_diffusion;
  double T;
  double sim_dt;
  double min_dt;
};

inline std::vector<ZooSettings> zoo_settings() {
  return {
      {ZooModel::double_well, "monomial:14", "monomial:14", 0.005, 0.001, 20000, 2e-4, 2e-3},
      {ZooModel::van_der_pol, "monomial:6", "monomial:6", 0.05, 0.02, 1000, 2e-5, 2e-4},
      {ZooModel::lorenz, "monomial:4", "trig:4", 0.05, 0.02, 1000, 2e-5, 2e-4},
  };
}

inline std::string format_coefficients(const Matrix& coeffs, Eigen::Index col,
                                       const Dictionary& dict) {
  std::string line;
  for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
    if (coeffs(r, col) == 0.0) continue;
    if (!line.empty()) line += ", ";
    line += dict.labels()[static_cast<std::size_t>(r)] + ":" + format_double(coeffs(r, col));
  }
  return line.empty() ? "0" : line;
}

/// Convergence slope per (method, target) from err_mean against dt at the
/// largest T. With `resolved_only`, cells whose err_mean is below
/// `resolution` standard errors are dropped first.
struct OrderFit {
  std::string method;
  Target target;
  double T;
  int points;
  double slope;  // NaN when fewer than 3 usable points
};

inline std::vector<OrderFit> fit_orders(const std::vector<ErrorReport>& reports,
                                        bool resolved_only, double resolution = 5.0) {
  std::vector<OrderFit> out;
  for (Target target : {Target::drift, Target::diffusion}) {
    std::vector<ErrorReport> subset;
    for (const auto& r : reports)
      if (r.target == target) subset.push_back(r);
    for (const auto& name : method_order(subset)) {
      double max_T = 0.0;
      for (const auto& r : subset)
        if (r.method == name) max_T = std::max(max_T, r.T);
      std::vector<std::pair<double, double>> pts;
      for (const auto& r : subset) {
        if (r.method != name || r.T != max_T) continue;
        if (!(r.err_mean > 0.0) || !std::isfinite(r.err_mean)) continue;
        if (resolved_only && !(r.err_mean >= resolution * err_mean_standard_error(r))) continue;
        pts.emplace_back(r.dt, r.err_mean);
      }
      OrderFit f{name, target, max_T, static_cast<int>(pts.size()),
                 std::numeric_limits<double>::quiet_NaN()};
      if (pts.size() >= 3) {
        try {
          f.slope = fit_order(pts);
        } catch (const InvalidArgument&) {
        }
      }
      out.push_back(f);
    }
  }
  return out;
}

namespace detail {

inline int cmd_zoo(std::ostream& out) {
  for (const auto& s : zoo_settings()) {
    const SdeModel m = model_zoo(s.model);
    out << to_string(s.model) << " (dim " << m.dim << "): λ_drift=" << format_double(s.lambda_drift)
        << ", λ_diff=" << format_double(s.lambda_diffusion) << ", T=" << format_double(s.T)
        << ", sim_dt=" << format_double(s.sim_dt) << ", min dt=" << format_double(s.min_dt)
        << ", drift dict " << s.drift_dictionary << ", diffusion dict "
        << s.diffusion_dictionary << "\n";
  }
  return kExitOk;
}

inline int cmd_truth(const std::string& model_name, const std::string& spec, std::ostream& out,
                     std::ostream& err) {
  SdeModel model;
  std::optional<Dictionary> parsed;
  try {
    model = model_zoo(model_name);
    parsed = parse_dictionary(spec, model.dim);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  const Dictionary& dict = *parsed;
  int printed = 0;
  try {
    const Matrix a = true_drift_coefficients(model, dict);
    const auto labels = drift_target_labels(model.dim);
    for (Eigen::Index c = 0; c < a.cols(); ++c, ++printed)
      out << labels[static_cast<std::size_t>(c)] << ": " << format_coefficients(a, c, dict) << "\n";
  } catch (const NotRepresentable& e) {
    err << "drift: " << e.what() << "\n";
  }
  try {
    const Matrix b = true_diffusion_coefficients(model, dict);
    const auto labels = diffusion_target_labels(model.dim);
    for (Eigen::Index c = 0; c < b.cols(); ++c, ++printed)
      out << labels[static_cast<std::size_t>(c)] << ": " << format_coefficients(b, c, dict) << "\n";
  } catch (const NotRepresentable& e) {
    err << "diffusion: " << e.what() << "\n";
  }
  return printed > 0 ? kExitOk : kExitConfig;
}

inline int cmd_order(const std::string& csv, bool resolved_only, std::ostream& out) {
  const auto reports = read_csv(csv);
  out << "method,target,T,points,slope\n";
  for (const auto& f : fit_orders(reports, resolved_only))
    out << f.method << ',' << to_string(f.target) << ',' << format_double(f.T) << ','
        << f.points << ',' << format_double(f.slope) << "\n";
  return kExitOk;
}

inline void write_failures(const ExperimentResult& result, const std::filesystem::path& path) {
  std::string text;
  for (const auto& cell : result.cells)
    for (std::size_t t = 0; t < cell.estimates.size(); ++t)
      if (!cell.estimates[t])
        text += cell.method + "\t" + format_double(cell.dt) + "\t" + format_double(cell.T) +
                "\t" + std::to_string(t) + "\t" + cell.failures[t] + "\n";
  if (!text.empty()) text = "method\tdt\tT\ttrial\treason\n" + text;
  if (!text.empty()) write_text(path, text);
}

inline int cmd_run(const std::string& config_path, const std::string& out_dir, unsigned threads,
                   std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  err << "running " << cfg.model_description << ": " << cfg.trials << " trials, "
      << cfg.methods.size() << " methods, " << cfg.dt_values.size() << " dt x "
      << cfg.T_values.size() << " T (seed " << cfg.base_seed << ")\n";
  RunOptions opts;
  opts.threads = threads;
  const int step = std::max(1, cfg.trials / 20);
  opts.progress = [&err, step](int done, int total) {
    if (done % step == 0 || done == total) err << "  trial " << done << "/" << total << "\n";
  };
  ExperimentResult result;
  try {
    result = run_experiment(cfg, opts);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const auto csv = dir / "results.csv";
  emit_csv(result.reports, csv);
  out << csv.string() << "\n";
  try {
    const auto plots = emit_plot_data(result.reports, (dir / "plot").string(),
                                      cfg.variance_series_dt());
    for (const auto& p : plots.written) out << p.string() << "\n";
    for (const auto& s : plots.skipped) err << "plot data skipped: " << s << "\n";
  } catch (const InvalidArgument& e) {
    err << "plot data skipped: " << e.what() << "\n";
  }
  const auto failures = dir / "failures.tsv";
  std::filesystem::remove(failures);
  write_failures(result, failures);
  int excluded = 0;
  for (const auto& c : result.cells) excluded += c.excluded();
  if (excluded > 0)
    err << excluded << " cell-trials excluded; details in " << failures.string() << "\n";
  return kExitOk;
}

}  // namespace detail

/// Entry point of the command-line tool.
inline int run_cli(int argc, char** argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Drift and diffusion identification benchmarks for SDEs", "sde_sindy"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "Run a Monte Carlo sweep from a JSON config");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--threads", threads, "Worker threads (default: config, then all cores)");

  auto* zoo = app.add_subcommand("zoo", "List built-in models and their published settings");

  std::string model_name, dict_spec;
  auto* truth = app.add_subcommand("truth", "Print exact coefficients of a built-in model");
  truth->add_option("model", model_name, "Model name")->required();
  truth->add_option("dict", dict_spec, "Dictionary, e.g. monomial:4 or trig:2")->required();

  std::string csv_path;
  bool resolved = false;
  auto* order = app.add_subcommand("order", "Fit convergence slopes from a results CSV");
  order->add_option("csv", csv_path, "results.csv from a run")->required();
  order->add_flag("--resolved", resolved,
                  "Drop cells whose err_mean is below 5 standard errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*run) return detail::cmd_run(config_path, out_dir, threads, out, err);
    if (*zoo) return detail::cmd_zoo(out);
    if (*truth) return detail::cmd_truth(model_name, dict_spec, out, err);
    if (*order) return detail::cmd_order(csv_path, resolved, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace sde_sindy::harness
