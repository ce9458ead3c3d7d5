#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "basis.hpp"
#include "common.hpp"
#include "rng.hpp"

namespace sde_sindy {

/// Writes mu(x) into `out` (length d).
using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;
/// Writes sigma(x) into `out` as a row-major d x d matrix.
using DiffusionFn =
    std::function<void(std::span<const double> x, std::span<double> out)>;

/// Exact description of a model whose drift components and diffusion
/// entries are polynomials (in x, or in sin x).
struct PolynomialForm {
  std::vector<Polynomial> drift;  // d entries
  std::vector<Polynomial> sigma;  // d*d entries, row-major
};

/// Ito SDE dX = mu(X) dt + sigma(X) dW.
struct SdeModel {
  std::string name;
  int dim = 1;
  DriftFn drift_fn;
  DiffusionFn diffusion_fn;
  std::vector<std::string> labels;
  std::optional<PolynomialForm> form;

  Vector drift(const Vector& x) const {
    Vector out(dim);
    drift_fn({x.data(), static_cast<std::size_t>(dim)},
             {out.data(), static_cast<std::size_t>(dim)});
    return out;
  }

  Matrix diffusion(const Vector& x) const {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> s(dim, dim);
    diffusion_fn({x.data(), static_cast<std::size_t>(dim)},
                 {s.data(), static_cast<std::size_t>(dim * dim)});
    return s;
  }
};

/// Uniformly sampled path. Row m of `states` is X at time m*dt.
struct Trajectory {
  Matrix states;
  double dt = 0.0;
  std::uint64_t seed = 0;
  double sim_dt = 0.0;

  Eigen::Index size() const noexcept { return states.rows(); }
  int dim() const noexcept { return static_cast<int>(states.cols()); }
  /// Time spanned by the samples.
  double duration() const noexcept { return static_cast<double>(size() - 1) * dt; }
};

/// Sigma = 1/2 sigma sigma^T, the quantity the diffusion estimators target.
inline Matrix true_sigma_matrix(const SdeModel& model, const Vector& x) {
  const Matrix s = model.diffusion(x);
  return 0.5 * s * s.transpose();
}

/// Trajectories whose components exceed this magnitude are treated as
/// diverged.
inline constexpr double kDivergenceBound = 1e9;

/// Euler-Maruyama integration. Returns n_steps / record_stride + 1 samples
/// spaced record_stride * sim_dt apart (every step when record_stride is 1).
inline Trajectory euler_maruyama(const SdeModel& model, const Vector& x0,
                                 double sim_dt, std::size_t n_steps,
                                 std::uint64_t seed, std::size_t record_stride = 1) {
  const int d = model.dim;
  if (!(sim_dt > 0.0) || !std::isfinite(sim_dt))
    throw InvalidArgument("euler_maruyama: sim_dt must be positive");
  if (n_steps < 1) throw InvalidArgument("euler_maruyama: n_steps must be >= 1");
  if (record_stride < 1 || n_steps % record_stride != 0)
    throw InvalidArgument("euler_maruyama: record_stride must divide n_steps");
  if (x0.size() != d) throw InvalidArgument("euler_maruyama: x0 has wrong dimension");

  Trajectory traj;
  traj.dt = sim_dt * static_cast<double>(record_stride);
  traj.sim_dt = sim_dt;
  traj.seed = seed;
  traj.states.resize(static_cast<Eigen::Index>(n_steps / record_stride + 1), d);

  GaussianStream gauss(seed);
  const double sqrt_dt = std::sqrt(sim_dt);
  const auto ud = static_cast<std::size_t>(d);
  std::vector<double> x(x0.data(), x0.data() + d), next(ud), mu(ud), sig(ud * ud),
      dw(ud);
  traj.states.row(0) = x0.transpose();

  for (std::size_t step = 0; step < n_steps; ++step) {
    model.drift_fn(x, mu);
    model.diffusion_fn(x, sig);
    for (auto& w : dw) w = sqrt_dt * gauss();
    for (std::size_t i = 0; i < ud; ++i) {
      double v = x[i] + mu[i] * sim_dt;
      for (std::size_t j = 0; j < ud; ++j) v += sig[i * ud + j] * dw[j];
      if (!std::isfinite(v) || std::abs(v) > kDivergenceBound)
        throw DivergenceError(step + 1, "euler_maruyama: trajectory diverged at step " +
                                            std::to_string(step + 1));
      next[i] = v;
    }
    x.swap(next);
    if ((step + 1) % record_stride == 0) {
      const auto row = static_cast<Eigen::Index>((step + 1) / record_stride);
      for (int i = 0; i < d; ++i) traj.states(row, i) = x[static_cast<std::size_t>(i)];
    }
  }
  return traj;
}

/// Keeps every stride-th sample.
inline Trajectory subsample(const Trajectory& traj, std::size_t stride) {
  if (stride < 1) throw InvalidArgument("subsample: stride must be >= 1");
  if (static_cast<std::size_t>(traj.size()) < stride + 1)
    throw InvalidArgument("subsample: stride " + std::to_string(stride) +
                          " exceeds the available samples");
  const auto n = (static_cast<std::size_t>(traj.size()) - 1) / stride + 1;
  Trajectory out;
  out.dt = traj.dt * static_cast<double>(stride);
  out.sim_dt = traj.sim_dt;
  out.seed = traj.seed;
  out.states.resize(static_cast<Eigen::Index>(n), traj.states.cols());
  for (std::size_t m = 0; m < n; ++m)
    out.states.row(static_cast<Eigen::Index>(m)) =
        traj.states.row(static_cast<Eigen::Index>(m * stride));
  return out;
}

/// First samples spanning exactly `duration` time units.
inline Trajectory truncate(const Trajectory& traj, double duration) {
  const double steps = duration / traj.dt;
  const auto n = static_cast<Eigen::Index>(std::llround(steps));
  if (n < 1 || std::abs(steps - static_cast<double>(n)) > 1e-6 * std::max(1.0, steps))
    throw InvalidArgument("truncate: duration is not a positive multiple of dt");
  if (n + 1 > traj.size())
    throw InvalidArgument("truncate: trajectory shorter than requested duration");
  Trajectory out = traj;
  out.states.conservativeResize(n + 1, Eigen::NoChange);
  return out;
}

namespace detail {

/// Evaluates a fixed set of polynomials sharing one power table.
class CompiledPolynomials {
 public:
  CompiledPolynomials(const std::vector<Polynomial>& polys, int dim) : dim_(dim) {
    for (const auto& p : polys) {
      std::vector<Term> terms;
      for (const auto& [e, c] : p.terms()) {
        terms.push_back({e, c});
        max_degree_ = std::max(max_degree_, *std::max_element(e.begin(), e.end()));
      }
      trig_.push_back(p.family() == BasisFamily::trig);
      polys_.push_back(std::move(terms));
    }
  }

  void operator()(std::span<const double> x, std::span<double> out) const {
    const int stride = max_degree_ + 1;
    // Powers of x (row 0) and of sin x (row 1).
    thread_local std::vector<double> pw;
    pw.assign(static_cast<std::size_t>(2 * dim_ * stride), 1.0);
    for (int v = 0; v < dim_; ++v) {
      const double b[2] = {x[static_cast<std::size_t>(v)],
                           std::sin(x[static_cast<std::size_t>(v)])};
      for (int f = 0; f < 2; ++f) {
        double* row = &pw[static_cast<std::size_t>((f * dim_ + v) * stride)];
        for (int k = 1; k < stride; ++k) row[k] = row[k - 1] * b[f];
      }
    }
    for (std::size_t p = 0; p < polys_.size(); ++p) {
      const int f = trig_[p] ? 1 : 0;
      double sum = 0.0;
      for (const auto& t : polys_[p]) {
        double v = t.coeff;
        for (int var = 0; var < dim_; ++var)
          v *= pw[static_cast<std::size_t>((f * dim_ + var) * stride +
                                           t.exps[static_cast<std::size_t>(var)])];
        sum += v;
      }
      out[p] = sum;
    }
  }

 private:
  struct Term {
    Exponents exps;
    double coeff;
  };
  int dim_;
  int max_degree_ = 0;
  std::vector<bool> trig_;
  std::vector<std::vector<Term>> polys_;
};

}  // namespace detail

/// Model whose drift and diffusion are given exactly by polynomial tables.
inline SdeModel model_from_polynomials(std::string name, int dim, PolynomialForm form,
                                       std::vector<std::string> labels = {}) {
  if (dim < 1) throw InvalidArgument("model dimension must be >= 1");
  if (static_cast<int>(form.drift.size()) != dim ||
      static_cast<int>(form.sigma.size()) != dim * dim)
    throw InvalidArgument("model '" + name + "': drift needs " + std::to_string(dim) +
                          " entries and diffusion " + std::to_string(dim * dim));
  for (const auto& p : form.drift)
    if (p.dim() != dim) throw InvalidArgument("drift polynomial has wrong dimension");
  for (const auto& p : form.sigma)
    if (p.dim() != dim) throw InvalidArgument("diffusion polynomial has wrong dimension");
  if (labels.empty())
    for (int i = 0; i < dim; ++i) labels.push_back(variable_name(i, dim));

  SdeModel m;
  m.name = std::move(name);
  m.dim = dim;
  m.labels = std::move(labels);
  m.drift_fn = detail::CompiledPolynomials(form.drift, dim);
  m.diffusion_fn = detail::CompiledPolynomials(form.sigma, dim);
  m.form = std::move(form);
  return m;
}

enum class ZooModel { double_well, van_der_pol, lorenz };

inline std::optional<ZooModel> parse_zoo_model(std::string_view s) {
  if (s == "double_well") return ZooModel::double_well;
  if (s == "van_der_pol") return ZooModel::van_der_pol;
  if (s == "lorenz") return ZooModel::lorenz;
  return std::nullopt;
}

inline std::string_view to_string(ZooModel m) {
  switch (m) {
    case ZooModel::double_well: return "double_well";
    case ZooModel::van_der_pol: return "van_der_pol";
    case ZooModel::lorenz: return "lorenz";
  }
  return "";
}

inline std::vector<ZooModel> zoo_models() {
  return {ZooModel::double_well, ZooModel::van_der_pol, ZooModel::lorenz};
}

/// Built-in benchmark models: the double-well diffusion, the noisy Van der
/// Pol oscillator and the noisy Lorenz system. Simulation uses hand-written
/// closed forms; `form` holds the matching polynomial description.
inline SdeModel model_zoo(ZooModel which) {
  using B = BasisFamily;
  SdeModel m;
  m.name = std::string(to_string(which));
  switch (which) {
    case ZooModel::double_well: {
      m.dim = 1;
      m.labels = {"x"};
      m.drift_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = -x[0] * x[0] * x[0] + 0.5 * x[0];
      };
      m.diffusion_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = 1.0 + 0.25 * x[0] * x[0];
      };
      m.form = PolynomialForm{
          {Polynomial::from_labels(1, B::monomial, {{"x", 0.5}, {"x^3", -1.0}})},
          {Polynomial::from_labels(1, B::monomial, {{"1", 1.0}, {"x^2", 0.25}})}};
      break;
    }
    case ZooModel::van_der_pol: {
      m.dim = 2;
      m.labels = {"x1", "x2"};
      m.drift_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = x[1];
        out[1] = (1.0 - x[0] * x[0]) * x[1] - x[0];
      };
      m.diffusion_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = 0.5 * (1.0 + 0.3 * x[1]);
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = 0.5 * (0.5 + 0.2 * x[0]);
      };
      const Polynomial zero(2, B::monomial);
      m.form = PolynomialForm{
          {Polynomial::from_labels(2, B::monomial, {{"x2", 1.0}}),
           Polynomial::from_labels(2, B::monomial,
                                   {{"x2", 1.0}, {"x1^2*x2", -1.0}, {"x1", -1.0}})},
          {Polynomial::from_labels(2, B::monomial, {{"1", 0.5}, {"x2", 0.15}}), zero,
           zero, Polynomial::from_labels(2, B::monomial, {{"1", 0.25}, {"x1", 0.1}})}};
      break;
    }
    case ZooModel::lorenz: {
      m.dim = 3;
      m.labels = {"x1", "x2", "x3"};
      m.drift_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = 10.0 * (x[1] - x[0]);
        out[1] = x[0] * (28.0 - x[2]) - x[1];
        out[2] = x[0] * x[1] - (8.0 / 3.0) * x[2];
      };
      m.diffusion_fn = [](std::span<const double> x, std::span<double> out) {
        const double s1 = std::sin(x[0]), s2 = std::sin(x[1]), s3 = std::sin(x[2]);
        out[0] = 1.0 + s2;
        out[1] = 0.0;
        out[2] = s1;
        out[3] = 0.0;
        out[4] = 1.0 + s3;
        out[5] = 0.0;
        out[6] = s1;
        out[7] = 0.0;
        out[8] = 1.0 - s2;
      };
      const Polynomial zero(3, B::trig);
      m.form = PolynomialForm{
          {Polynomial::from_labels(3, B::monomial, {{"x2", 10.0}, {"x1", -10.0}}),
           Polynomial::from_labels(3, B::monomial,
                                   {{"x1", 28.0}, {"x1*x3", -1.0}, {"x2", -1.0}}),
           Polynomial::from_labels(3, B::monomial,
                                   {{"x1*x2", 1.0}, {"x3", -8.0 / 3.0}})},
          {Polynomial::from_labels(3, B::trig, {{"1", 1.0}, {"sin(x2)", 1.0}}), zero,
           Polynomial::from_labels(3, B::trig, {{"sin(x1)", 1.0}}), zero,
           Polynomial::from_labels(3, B::trig, {{"1", 1.0}, {"sin(x3)", 1.0}}), zero,
           Polynomial::from_labels(3, B::trig, {{"sin(x1)", 1.0}}), zero,
           Polynomial::from_labels(3, B::trig, {{"1", 1.0}, {"sin(x2)", -1.0}})}};
      break;
    }
  }
  return m;
}

inline SdeModel model_zoo(std::string_view name) {
  const auto which = parse_zoo_model(name);
  if (!which) throw InvalidArgument("unknown model '" + std::string(name) + "'");
  return model_zoo(*which);
}

}  // namespace sde_sindy
