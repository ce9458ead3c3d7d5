#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dictionary.hpp"
#include "estimators.hpp"
#include "sde_sim.hpp"

namespace sde_sindy {

/// Per-trial coefficient estimates for one (method, dt, T) cell.
struct TrialEnsemble {
  std::vector<Matrix> estimates;  // each k x (d or d(d+1)/2)
  Matrix truth;
  std::string method;
  Target target = Target::drift;
  double dt = 0.0;
  double T = 0.0;
  int diverged = 0;  // excluded trials
};

/// Normalized mean error and total variance of an ensemble.
struct ErrorReport {
  std::string method;
  Target target = Target::drift;
  double dt = 0.0;
  double T = 0.0;
  int trials = 0;
  int diverged = 0;
  double err_mean = 0.0;
  double err_var = 0.0;
};

/// Err_m = sqrt(sum_c ||E est_c - truth_c||^2 / sum_c ||truth_c||^2)
/// Err_var = sum_c E||est_c - E est_c||^2 / sum_c ||truth_c||^2
/// with c over the columns (drift components or diffusion pairs i >= j) and
/// expectations as population averages over trials.
inline ErrorReport aggregate(const TrialEnsemble& ens) {
  const auto n = ens.estimates.size();
  if (n < 2) throw InvalidArgument("aggregate: need at least 2 trials, got " + std::to_string(n));
  const double norm2 = ens.truth.squaredNorm();
  if (!(norm2 > 0.0)) throw InvalidArgument("aggregate: truth has zero norm");
  for (const auto& e : ens.estimates)
    if (e.rows() != ens.truth.rows() || e.cols() != ens.truth.cols())
      throw InvalidArgument("aggregate: estimate shape differs from truth");

  Matrix mean = Matrix::Zero(ens.truth.rows(), ens.truth.cols());
  for (const auto& e : ens.estimates) mean += e;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& e : ens.estimates) spread += (e - mean).squaredNorm();
  spread /= static_cast<double>(n);

  ErrorReport r;
  r.method = ens.method;
  r.target = ens.target;
  r.dt = ens.dt;
  r.T = ens.T;
  r.trials = static_cast<int>(n);
  r.diverged = ens.diverged;
  r.err_mean = std::sqrt((mean - ens.truth).squaredNorm() / norm2);
  r.err_var = spread / norm2;
  return r;
}

/// Monte Carlo standard error of err_mean: the noise floor below which
/// err_mean no longer resolves bias.
inline double err_mean_standard_error(const ErrorReport& r) {
  if (r.trials < 1) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(r.err_var / static_cast<double>(r.trials));
}

/// Least-squares slope of log(value) against log(x).
inline double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3)
    throw InvalidArgument("fit_order: need at least 3 points, got " +
                          std::to_string(points.size()));
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y))
      throw InvalidArgument("fit_order: values must be finite and positive");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    const double lx = std::log(x) - mx;
    sxx += lx * lx;
    sxy += lx * (std::log(y) - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("fit_order: need at least two distinct x values");
  return sxy / sxx;
}

/// Empirical convergence order from (dt, err_mean) points.
inline double fit_order(const std::vector<std::pair<double, double>>& points) {
  return fit_loglog_slope(points);
}

namespace detail {

inline void scatter(const Polynomial& p, const Dictionary& dict, Eigen::Index col, Matrix& out,
                    const std::string& what) {
  if (p.dim() != dict.dim()) throw NotRepresentable(what + ": dimension mismatch");
  if (!p.is_constant() && p.family() != dict.family())
    throw NotRepresentable(what + " is a " + std::string(to_string(p.family())) +
                           " expression; dictionary is " + dict.spec());
  for (const auto& [e, c] : p.terms()) {
    const auto j = dict.index_of(e);
    if (!j)
      throw NotRepresentable(what + ": term " + term_label(e, p.family()) + " not in " +
                             dict.spec());
    out(*j, col) = c;
  }
}

inline const PolynomialForm& require_form(const SdeModel& model) {
  if (!model.form)
    throw NotRepresentable("model '" + model.name + "' has no closed-form coefficients");
  return *model.form;
}

}  // namespace detail

/// Exact alpha (k x d): mu^i = theta alpha^i.
inline Matrix true_drift_coefficients(const SdeModel& model, const Dictionary& dict) {
  const auto& form = detail::require_form(model);
  Matrix out = Matrix::Zero(dict.size(), model.dim);
  for (int i = 0; i < model.dim; ++i)
    detail::scatter(form.drift[static_cast<std::size_t>(i)], dict, i, out,
                    "drift component " + std::to_string(i + 1));
  return out;
}

/// Sigma^{i,j} = 1/2 sum_k sigma^{i,k} sigma^{j,k} as polynomials, pairs i >= j.
inline std::vector<Polynomial> sigma_polynomials(const SdeModel& model) {
  const auto& form = detail::require_form(model);
  const int d = model.dim;
  std::vector<Polynomial> out;
  for (const auto& [i, j] : diffusion_pairs(d)) {
    Polynomial acc(d, form.sigma[0].family());
    for (int k = 0; k < d; ++k)
      acc += form.sigma[static_cast<std::size_t>(i * d + k)] *
             form.sigma[static_cast<std::size_t>(j * d + k)];
    out.push_back(0.5 * acc);
  }
  return out;
}

/// Exact beta (k x d(d+1)/2): Sigma^{i,j} = theta beta^{i,j}, pairs i >= j.
inline Matrix true_diffusion_coefficients(const SdeModel& model, const Dictionary& dict) {
  const auto polys = sigma_polynomials(model);
  const auto pairs = diffusion_pairs(model.dim);
  Matrix out = Matrix::Zero(dict.size(), static_cast<Eigen::Index>(polys.size()));
  for (std::size_t c = 0; c < polys.size(); ++c)
    detail::scatter(polys[c], dict, static_cast<Eigen::Index>(c), out,
                    "Sigma[" + std::to_string(pairs[c].first + 1) + "," +
                        std::to_string(pairs[c].second + 1) + "]");
  return out;
}

struct TrueCoefficients {
  Matrix drift;
  Matrix diffusion;
};

inline TrueCoefficients true_coefficients(const SdeModel& model, const Dictionary& dict) {
  return {true_drift_coefficients(model, dict), true_diffusion_coefficients(model, dict)};
}

}  // namespace sde_sindy
