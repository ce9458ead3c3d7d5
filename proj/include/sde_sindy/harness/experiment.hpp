#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "../dictionary.hpp"
#include "../estimators.hpp"
#include "../metrics.hpp"
#include "../rng.hpp"
#include "../sde_sim.hpp"
#include "../sparse.hpp"
#include "config.hpp"

namespace sde_sindy::harness {

/// All per-trial estimates of one (method, dt, T) cell.
struct CellResult {
  std::string method;
  MethodKind kind = MethodKind::drift_fd1;
  Target target = Target::drift;
  double dt = 0.0;
  double T = 0.0;
  std::vector<std::optional<Matrix>> estimates;  // by trial; empty = excluded
  std::vector<std::string> failures;             // by trial; empty when fine

  int excluded() const {
    int n = 0;
    for (const auto& e : estimates) n += e ? 0 : 1;
    return n;
  }
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  Matrix drift_truth;      // empty when no drift method ran
  Matrix diffusion_truth;  // empty when no diffusion method ran
  std::vector<ErrorReport> reports;  // one per cell, same order
};

struct RunOptions {
  unsigned threads = 0;  // overrides the config when non-zero
  /// Called after each finished trial with (finished, total); serialized.
  std::function<void(int, int)> progress;
};

namespace detail {

struct TrialOutput {
  std::vector<std::optional<Matrix>> estimates;  // by cell
  std::vector<std::string> failures;             // by cell, empty when fine
};

class TrialRunner {
 public:
  explicit TrialRunner(const ExperimentConfig& cfg)
      : cfg_(cfg), drift_dict_(cfg.drift_dict()), diff_dict_(cfg.diffusion_dict()) {
    for (double dt : cfg.dt_values) strides_.push_back(cfg.stride_of(dt));
    record_stride_ = 0;
    for (auto s : strides_) record_stride_ = std::gcd(record_stride_, s);
    const double max_T = *std::max_element(cfg.T_values.begin(), cfg.T_values.end());
    n_steps_ = static_cast<std::size_t>(std::llround(max_T / cfg.sim_dt));
    max_delay_ = cfg.max_delay();
    same_dict_ = drift_dict_.spec() == diff_dict_.spec();
  }

  std::size_t cell_count() const {
    return cfg_.methods.size() * cfg_.dt_values.size() * cfg_.T_values.size();
  }

  std::size_t cell_index(std::size_t m, std::size_t i, std::size_t j) const {
    return (m * cfg_.dt_values.size() + i) * cfg_.T_values.size() + j;
  }

  TrialOutput run(int trial) const {
    TrialOutput out;
    out.estimates.resize(cell_count());
    out.failures.resize(cell_count());

    const std::uint64_t seed = trial_seed(cfg_.base_seed, static_cast<std::uint64_t>(trial));
    GaussianStream ic(derive_seed(seed, 0));
    Vector x0(cfg_.model.dim);
    for (int i = 0; i < cfg_.model.dim; ++i) x0(i) = ic();

    Trajectory traj;
    try {
      traj = euler_maruyama(cfg_.model, x0, cfg_.sim_dt, n_steps_, derive_seed(seed, 1),
                            record_stride_);
    } catch (const DivergenceError& e) {
      for (auto& f : out.failures) f = e.what();
      return out;
    }

    for (std::size_t i = 0; i < cfg_.dt_values.size(); ++i) {
      const Trajectory sub = subsample(traj, strides_[i] / record_stride_);
      for (std::size_t j = 0; j < cfg_.T_values.size(); ++j)
        run_cell_group(truncate(sub, cfg_.T_values[j]), i, j, out);
    }
    return out;
  }

 private:
  SolverSettings settings(Target t) const {
    return SolverSettings{cfg_.solver,
                          t == Target::drift ? cfg_.lambda_drift : cfg_.lambda_diffusion,
                          cfg_.max_iter};
  }

  void run_cell_group(const Trajectory& tr, std::size_t i, std::size_t j,
                      TrialOutput& out) const {
    const double dt = cfg_.dt_values[i];
    std::optional<DesignSet> drift_ds, diff_ds;
    try {
      drift_ds.emplace(build_design_set(drift_dict_, tr, max_delay_));
      if (!same_dict_) diff_ds.emplace(build_design_set(diff_dict_, tr, max_delay_));
    } catch (const Error& e) {
      for (std::size_t m = 0; m < cfg_.methods.size(); ++m)
        out.failures[cell_index(m, i, j)] = e.what();
      return;
    }
    const DesignSet& dds = same_dict_ ? *drift_ds : *diff_ds;
    SystemAssembler drift_asm(*drift_ds);
    std::optional<SystemAssembler> own_diff_asm;
    if (!same_dict_) own_diff_asm.emplace(dds);
    SystemAssembler& diff_asm = same_dict_ ? drift_asm : *own_diff_asm;

    // Drift estimates by kind, shared between drift cells and drift-corrected
    // diffusion cells.
    std::map<MethodKind, std::optional<Matrix>> drift_cache;
    std::map<MethodKind, std::string> drift_errors;
    auto drift_estimate = [&](MethodKind k) -> const std::optional<Matrix>& {
      auto it = drift_cache.find(k);
      if (it != drift_cache.end()) return it->second;
      std::optional<Matrix> est;
      try {
        est = solve_system(drift_asm.assemble(MethodSpec::of(k)), settings(Target::drift));
      } catch (const Error& e) {
        drift_errors[k] = e.what();
      }
      return drift_cache.emplace(k, std::move(est)).first->second;
    };

    for (std::size_t m = 0; m < cfg_.methods.size(); ++m) {
      const MethodEntry& entry = cfg_.methods[m];
      const std::size_t c = cell_index(m, i, j);
      try {
        if (target_of(entry.kind) == Target::drift) {
          if (entry.kind == MethodKind::drift_general) {
            out.estimates[c] = solve_system(drift_asm.assemble(entry.spec_for(dt)),
                                            settings(Target::drift));
          } else {
            out.estimates[c] = drift_estimate(entry.kind);
            if (!out.estimates[c]) out.failures[c] = drift_errors[entry.kind];
          }
          continue;
        }
        std::optional<DriftSamples> samples;
        if (const auto src = cfg_.drift_source.find(entry.kind); src != cfg_.drift_source.end()) {
          const auto& alpha = drift_estimate(src->second);
          if (!alpha) {
            out.failures[c] = "drift estimate failed: " + drift_errors[src->second];
            continue;
          }
          samples = DriftSamples::from(*drift_ds, *alpha);
        }
        out.estimates[c] = solve_system(
            diff_asm.assemble(MethodSpec::of(entry.kind), samples ? &*samples : nullptr),
            settings(Target::diffusion));
      } catch (const Error& e) {
        out.estimates[c].reset();
        out.failures[c] = e.what();
      }
    }
  }

  const ExperimentConfig& cfg_;
  Dictionary drift_dict_;
  Dictionary diff_dict_;
  std::vector<std::size_t> strides_;
  std::size_t record_stride_ = 1;
  std::size_t n_steps_ = 0;
  int max_delay_ = 1;
  bool same_dict_ = false;
};

/// Runs fn(i) for i in [0, n) on `threads` workers; rethrows the first
/// escaped exception after all workers stop.
inline void parallel_for(int n, unsigned threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Report for a cell: aggregate over its surviving trials, or NaN errors when
/// fewer than two survived.
inline ErrorReport report_for(const CellResult& cell, const Matrix& truth) {
  TrialEnsemble ens;
  ens.truth = truth;
  ens.method = cell.method;
  ens.target = cell.target;
  ens.dt = cell.dt;
  ens.T = cell.T;
  ens.diverged = cell.excluded();
  for (const auto& e : cell.estimates)
    if (e) ens.estimates.push_back(*e);
  if (ens.estimates.size() >= 2) return aggregate(ens);
  ErrorReport r;
  r.method = cell.method;
  r.target = cell.target;
  r.dt = cell.dt;
  r.T = cell.T;
  r.trials = static_cast<int>(ens.estimates.size());
  r.diverged = ens.diverged;
  r.err_mean = r.err_var = std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// True coefficients for each target the config's methods estimate.
inline std::pair<Matrix, Matrix> config_truth(const ExperimentConfig& cfg) {
  bool drift = false, diffusion = false;
  for (const auto& m : cfg.methods) (target_of(m.kind) == Target::drift ? drift : diffusion) = true;
  try {
    Matrix a, b;
    if (drift) a = true_drift_coefficients(cfg.model, cfg.drift_dict());
    if (diffusion) b = true_diffusion_coefficients(cfg.model, cfg.diffusion_dict());
    return {a, b};
  } catch (const NotRepresentable& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// Seeded Monte Carlo sweep. Trial t simulates one trajectory at sim_dt from
/// seed trial_seed(base_seed, t); every (dt, T, method) cell reuses it via
/// subsampling and truncation. Results do not depend on the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  ExperimentResult result;
  std::tie(result.drift_truth, result.diffusion_truth) = config_truth(cfg);

  const detail::TrialRunner runner(cfg);
  std::vector<detail::TrialOutput> outputs(static_cast<std::size_t>(cfg.trials));
  unsigned threads = opts.threads ? opts.threads : cfg.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::mutex progress_mutex;
  int finished = 0;
  detail::parallel_for(cfg.trials, threads, [&](int t) {
    outputs[static_cast<std::size_t>(t)] = runner.run(t);
    if (opts.progress) {
      std::lock_guard lock(progress_mutex);
      opts.progress(++finished, cfg.trials);
    }
  });

  for (std::size_t m = 0; m < cfg.methods.size(); ++m)
    for (std::size_t i = 0; i < cfg.dt_values.size(); ++i)
      for (std::size_t j = 0; j < cfg.T_values.size(); ++j) {
        const std::size_t c = runner.cell_index(m, i, j);
        CellResult cell;
        cell.method = cfg.methods[m].name;
        cell.kind = cfg.methods[m].kind;
        cell.target = target_of(cell.kind);
        cell.dt = cfg.dt_values[i];
        cell.T = cfg.T_values[j];
        for (auto& out : outputs) {
          cell.estimates.push_back(out.estimates[c]);
          cell.failures.push_back(out.failures[c]);
        }
        result.reports.push_back(report_for(
            cell, cell.target == Target::drift ? result.drift_truth : result.diffusion_truth));
        result.cells.push_back(std::move(cell));
      }
  return result;
}

}  // namespace sde_sindy::harness
