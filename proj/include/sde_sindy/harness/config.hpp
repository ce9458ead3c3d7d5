#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "../dictionary.hpp"
#include "../estimators.hpp"
#include "../sde_sim.hpp"
#include "../sparse.hpp"

namespace sde_sindy::harness {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// One estimator in a sweep. For drift_general, `b_scaled` holds b_l * dt so
/// that a single entry works across every sampling period.
struct MethodEntry {
  std::string name;
  MethodKind kind = MethodKind::drift_fd1;
  std::vector<double> a;
  std::vector<double> b_scaled;

  MethodSpec spec_for(double dt) const {
    if (kind != MethodKind::drift_general) return MethodSpec::of(kind);
    std::vector<double> b;
    for (double v : b_scaled) b.push_back(v / dt);
    return MethodSpec::general(a, b);
  }

  int max_delay() const {
    if (kind != MethodKind::drift_general) return required_delay(kind);
    return MethodSpec{kind, a, b_scaled}.max_delay();
  }
};

struct ExperimentConfig {
  SdeModel model;
  std::string model_description;
  std::string drift_dictionary = "monomial:5";
  std::string diffusion_dictionary = "monomial:5";
  double sim_dt = 2e-4;
  std::vector<double> T_values;
  std::vector<double> dt_values;
  std::optional<double> variance_dt;  // dt of the variance-vs-T series
  int trials = 100;
  std::uint64_t base_seed = 1;
  std::vector<MethodEntry> methods;
  double lambda_drift = 0.0;
  double lambda_diffusion = 0.0;
  SolverKind solver = SolverKind::dense;
  int max_iter = kDefaultStlsIterations;
  /// Drift method feeding each drift-corrected diffusion method.
  std::map<MethodKind, MethodKind> drift_source = {
      {MethodKind::diff_drift_sub, MethodKind::drift_fd1},
      {MethodKind::diff_trap, MethodKind::drift_trap}};
  unsigned threads = 0;  // 0: hardware concurrency

  Dictionary drift_dict() const { return parse_dictionary(drift_dictionary, model.dim); }
  Dictionary diffusion_dict() const { return parse_dictionary(diffusion_dictionary, model.dim); }

  /// Integer ratio dt / sim_dt.
  std::size_t stride_of(double dt) const {
    return static_cast<std::size_t>(std::llround(dt / sim_dt));
  }

  int max_delay() const {
    int d = 1;
    for (const auto& m : methods) d = std::max(d, m.max_delay());
    return d;
  }

  double variance_series_dt() const {
    if (variance_dt) return *variance_dt;
    return *std::min_element(dt_values.begin(), dt_values.end());
  }
};

/// Minimum ratio between the sampling period and the simulation step.
inline constexpr double kMinResolution = 10.0;

namespace detail {

inline bool is_integer_multiple(double value, double unit, double* ratio_out = nullptr) {
  const double r = value / unit;
  const double n = std::round(r);
  if (ratio_out) *ratio_out = r;
  return n >= 1.0 && std::abs(r - n) <= 1e-9 * std::max(1.0, n);
}

}  // namespace detail

/// Checks the sweep invariants: every dt an integer multiple (>= 10x) of
/// sim_dt, every T an integer multiple of the largest dt.
inline void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (!(cfg.sim_dt > 0.0)) fail("sim_dt must be positive");
  if (cfg.dt_values.empty()) fail("dt_values must be non-empty");
  if (cfg.T_values.empty()) fail("T_values must be non-empty");
  if (cfg.trials < 2) fail("trials must be >= 2");
  if (cfg.methods.empty()) fail("methods must be non-empty");
  if (!(cfg.lambda_drift >= 0.0) || !(cfg.lambda_diffusion >= 0.0))
    fail("lambdas must be non-negative");
  if (cfg.max_iter < 1) fail("max_iter must be >= 1");
  for (double dt : cfg.dt_values) {
    double ratio = 0;
    if (!(dt > 0.0) || !detail::is_integer_multiple(dt, cfg.sim_dt, &ratio))
      fail("dt " + std::to_string(dt) + " is not an integer multiple of sim_dt");
    if (std::round(ratio) < kMinResolution)
      fail("dt " + std::to_string(dt) + " is less than 10 simulation steps");
  }
  const double max_dt = *std::max_element(cfg.dt_values.begin(), cfg.dt_values.end());
  for (double T : cfg.T_values)
    if (!(T > 0.0) || !detail::is_integer_multiple(T, max_dt))
      fail("T " + std::to_string(T) + " is not an integer multiple of the largest dt");
  if (cfg.variance_dt &&
      std::find(cfg.dt_values.begin(), cfg.dt_values.end(), *cfg.variance_dt) ==
          cfg.dt_values.end())
    fail("variance_dt must be one of dt_values");
  std::map<std::string, int> names;
  for (const auto& m : cfg.methods)
    if (++names[m.name] > 1) fail("duplicate method name '" + m.name + "'");
  for (const auto& [diff, drift] : cfg.drift_source)
    if (target_of(diff) != Target::diffusion || target_of(drift) != Target::drift ||
        drift == MethodKind::drift_general)
      fail("drift_source must map a diffusion method to drift_fd1/drift_fd2/drift_trap");
  try {
    (void)cfg.drift_dict();
    (void)cfg.diffusion_dict();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
}

namespace detail {

using nlohmann::json;

inline std::vector<Polynomial> parse_poly_list(const json& arr, int dim, BasisFamily family,
                                               const std::string& what) {
  if (!arr.is_array()) throw ConfigError("config: model." + what + " must be an array");
  std::vector<Polynomial> out;
  for (const auto& entry : arr) {
    if (!entry.is_object())
      throw ConfigError("config: model." + what + " entries must be {term: coeff} tables");
    out.push_back(Polynomial::from_labels(dim, family, entry.get<std::map<std::string, double>>()));
  }
  return out;
}

inline SdeModel parse_inline_model(const json& j) {
  const int dim = j.at("dim").get<int>();
  auto family = [&](const char* key) {
    const std::string s = j.value(key, std::string("monomial"));
    const auto f = parse_basis_family(s);
    if (!f) throw ConfigError("config: unknown basis family '" + s + "'");
    return *f;
  };
  PolynomialForm form;
  form.drift = parse_poly_list(j.at("drift"), dim, family("drift_family"), "drift");
  const json& sig = j.at("diffusion");
  if (!sig.is_array() || static_cast<int>(sig.size()) != dim)
    throw ConfigError("config: model.diffusion must be a " + std::to_string(dim) + " x " +
                      std::to_string(dim) + " array of tables");
  for (const auto& row : sig) {
    auto polys = parse_poly_list(row, dim, family("diffusion_family"), "diffusion");
    if (static_cast<int>(polys.size()) != dim)
      throw ConfigError("config: every model.diffusion row needs " + std::to_string(dim) +
                        " entries");
    for (auto& p : polys) form.sigma.push_back(std::move(p));
  }
  return model_from_polynomials(j.value("name", std::string("inline")), dim, std::move(form));
}

inline MethodEntry parse_method(const json& j) {
  MethodEntry m;
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else if (j.is_object()) {
    kind = j.at("kind").get<std::string>();
  } else {
    throw ConfigError("config: methods entries must be names or objects");
  }
  const auto k = parse_method_kind(kind);
  if (!k) throw ConfigError("config: unknown method '" + kind + "'");
  m.kind = *k;
  m.name = j.is_object() ? j.value("name", kind) : kind;
  if (m.kind == MethodKind::drift_general) {
    if (!j.is_object())
      throw ConfigError("config: drift_general needs {\"kind\", \"a\", \"b\"}");
    m.a = j.at("a").get<std::vector<double>>();
    m.b_scaled = j.at("b").get<std::vector<double>>();
    try {
      (void)m.spec_for(1.0);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else if (j.is_object() && (j.contains("a") || j.contains("b"))) {
    throw ConfigError("config: only drift_general accepts a/b coefficients");
  }
  return m;
}

}  // namespace detail

/// Builds a config from its JSON form; see README for the schema.
/// The SINDY_SEED environment variable, when set, overrides base_seed.
inline ExperimentConfig parse_config(const nlohmann::json& j, bool honor_env = true) {
  using nlohmann::json;
  ExperimentConfig cfg;
  try {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    const json& model = j.at("model");
    if (model.is_string()) {
      const auto which = parse_zoo_model(model.get<std::string>());
      if (!which) throw ConfigError("config: unknown model '" + model.get<std::string>() + "'");
      cfg.model = model_zoo(*which);
      cfg.model_description = model.get<std::string>();
    } else {
      cfg.model = detail::parse_inline_model(model);
      cfg.model_description = cfg.model.name;
    }
    cfg.drift_dictionary = j.value("drift_dictionary", cfg.drift_dictionary);
    cfg.diffusion_dictionary = j.value("diffusion_dictionary", cfg.diffusion_dictionary);
    cfg.sim_dt = j.at("sim_dt").get<double>();
    cfg.T_values = j.at("T_values").get<std::vector<double>>();
    cfg.dt_values = j.at("dt_values").get<std::vector<double>>();
    if (j.contains("variance_dt")) cfg.variance_dt = j.at("variance_dt").get<double>();
    cfg.trials = j.value("trials", cfg.trials);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    for (const auto& m : j.at("methods")) cfg.methods.push_back(detail::parse_method(m));
    cfg.lambda_drift = j.value("lambda_drift", 0.0);
    cfg.lambda_diffusion = j.value("lambda_diffusion", 0.0);
    const std::string solver = j.value("solver", std::string("dense"));
    if (solver == "dense") cfg.solver = SolverKind::dense;
    else if (solver == "stls") cfg.solver = SolverKind::stls;
    else throw ConfigError("config: solver must be 'dense' or 'stls'");
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    cfg.threads = j.value("threads", 0u);
    if (j.contains("drift_source")) {
      for (const auto& [key, val] : j.at("drift_source").items()) {
        const auto diff = parse_method_kind(key);
        const auto drift = parse_method_kind(val.get<std::string>());
        if (!diff || !drift)
          throw ConfigError("config: drift_source entries must name methods");
        cfg.drift_source[*diff] = *drift;
      }
    }
    for (const auto& [key, val] : j.items()) {
      static const char* known[] = {"model", "drift_dictionary", "diffusion_dictionary",
                                    "sim_dt", "T_values", "dt_values", "variance_dt",
                                    "trials", "base_seed", "methods", "lambda_drift",
                                    "lambda_diffusion", "solver", "max_iter", "threads",
                                    "drift_source", "description"};
      if (std::find(std::begin(known), std::end(known), key) == std::end(known))
        throw ConfigError("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (honor_env) {
    if (const char* env = std::getenv("SINDY_SEED"); env != nullptr && *env != '\0') {
      char* end = nullptr;
      const auto v = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0') throw ConfigError("SINDY_SEED must be an unsigned integer");
      cfg.base_seed = v;
    }
  }
  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, bool honor_env = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(j, honor_env);
}

}  // namespace sde_sindy::harness
