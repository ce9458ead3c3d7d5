#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "basis.hpp"
#include "common.hpp"
#include "sde_sim.hpp"

namespace sde_sindy {

/// Largest dictionary we agree to enumerate.
inline constexpr std::size_t kMaxDictionarySize = 1'000'000;

/// Ordered dictionary of products of basis variables (x or sin x) of total
/// degree <= max_degree, in graded-lexicographic order, constant first.
class Dictionary {
 public:
  Dictionary(BasisFamily family, int dim, int max_degree)
      : family_(family), dim_(dim), max_degree_(max_degree) {
    if (dim < 1) throw InvalidArgument("dictionary dimension must be >= 1");
    if (max_degree < 0) throw InvalidArgument("dictionary degree must be >= 0");
    if (count(dim, max_degree) > kMaxDictionarySize)
      throw InvalidArgument("dictionary would exceed " +
                            std::to_string(kMaxDictionarySize) + " functions");
    Exponents e(dim, 0);
    for (int deg = 0; deg <= max_degree; ++deg) enumerate(e, 0, deg);
    for (std::size_t j = 0; j < exponents_.size(); ++j) {
      labels_.push_back(term_label(exponents_[j], family_));
      index_.emplace(exponents_[j], j);
    }
  }

  /// C(dim + max_degree, dim), saturating above kMaxDictionarySize.
  static std::size_t count(int dim, int max_degree) {
    // C(n, r) built incrementally; each prefix is itself a binomial.
    double c = 1.0;
    for (int i = 1; i <= dim; ++i) {
      c = c * (max_degree + i) / i;
      if (c > static_cast<double>(kMaxDictionarySize)) return kMaxDictionarySize + 1;
    }
    return static_cast<std::size_t>(std::llround(c));
  }

  BasisFamily family() const noexcept { return family_; }
  int dim() const noexcept { return dim_; }
  int max_degree() const noexcept { return max_degree_; }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(exponents_.size()); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<Exponents>& exponents() const noexcept { return exponents_; }

  /// "monomial:4" / "trig:4".
  std::string spec() const {
    return std::string(to_string(family_)) + ":" + std::to_string(max_degree_);
  }

  std::optional<Eigen::Index> index_of(const Exponents& e) const {
    const auto it = index_.find(e);
    if (it == index_.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it->second);
  }

  std::optional<Eigen::Index> index_of(std::string_view label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - labels_.begin());
  }

  RowVector evaluate(const Vector& x) const {
    if (x.size() != dim_) throw InvalidArgument("dictionary: state has wrong dimension");
    Matrix row = x.transpose();
    return evaluate_rows(row).row(0);
  }

  /// theta evaluated on every row of `states` (n x dim) -> n x size().
  Matrix evaluate_rows(const Matrix& states) const {
    if (states.cols() != dim_)
      throw InvalidArgument("dictionary: states have wrong dimension");
    const Eigen::Index n = states.rows();
    const Eigen::Index k = size();
    Matrix out(n, k);
    const int stride = max_degree_ + 1;
    std::vector<double> pw(static_cast<std::size_t>(dim_ * stride));
    for (Eigen::Index r = 0; r < n; ++r) {
      for (int v = 0; v < dim_; ++v) {
        const double b = family_ == BasisFamily::trig ? std::sin(states(r, v)) : states(r, v);
        double* p = &pw[static_cast<std::size_t>(v * stride)];
        p[0] = 1.0;
        for (int q = 1; q < stride; ++q) p[q] = p[q - 1] * b;
      }
      for (Eigen::Index j = 0; j < k; ++j) {
        const Exponents& e = exponents_[static_cast<std::size_t>(j)];
        double val = 1.0;
        for (int v = 0; v < dim_; ++v)
          val *= pw[static_cast<std::size_t>(v * stride + e[static_cast<std::size_t>(v)])];
        out(r, j) = val;
      }
    }
    return out;
  }

 private:
  // Exponent of variable `var` runs from `remaining` down to 0.
  void enumerate(Exponents& e, int var, int remaining) {
    if (var == dim_ - 1) {
      e[static_cast<std::size_t>(var)] = remaining;
      exponents_.push_back(e);
      return;
    }
    for (int p = remaining; p >= 0; --p) {
      e[static_cast<std::size_t>(var)] = p;
      enumerate(e, var + 1, remaining - p);
    }
    e[static_cast<std::size_t>(var)] = 0;
  }

  BasisFamily family_;
  int dim_;
  int max_degree_;
  std::vector<Exponents> exponents_;
  std::vector<std::string> labels_;
  std::map<Exponents, std::size_t> index_;
};

inline Dictionary monomial_dictionary(int dim, int max_degree) {
  return Dictionary(BasisFamily::monomial, dim, max_degree);
}

inline Dictionary trig_monomial_dictionary(int dim, int max_degree) {
  return Dictionary(BasisFamily::trig, dim, max_degree);
}

/// Parses "monomial:<degree>" or "trig:<degree>".
inline Dictionary parse_dictionary(std::string_view spec, int dim) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw InvalidArgument("dictionary spec '" + std::string(spec) +
                          "' must look like monomial:<degree> or trig:<degree>");
  const auto family = parse_basis_family(spec.substr(0, colon));
  int degree = -1;
  const auto digits = spec.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), degree);
  if (!family || ec != std::errc() || ptr != digits.data() + digits.size() || degree < 0)
    throw InvalidArgument("bad dictionary spec '" + std::string(spec) + "'");
  return Dictionary(*family, dim, degree);
}

/// Delayed design matrices built from one trajectory.
///
/// With N = samples - max_delay, Theta_n is rows n..n+N-1 of the dictionary
/// evaluated along the path and D^i_n has entries X^i_{m+n} - X^i_m for
/// m = 0..N-1. Every matrix shares the same N rows, so multi-step estimators
/// read aligned data. Theta_n is a view into one evaluated block, so delays
/// cost no extra memory.
class DesignSet {
 public:
  DesignSet(Matrix phi, Matrix states, int max_delay, double dt)
      : phi_(std::move(phi)), states_(std::move(states)), max_delay_(max_delay), dt_(dt) {}

  Eigen::Index rows() const noexcept { return phi_.rows() - max_delay_; }
  Eigen::Index size() const noexcept { return phi_.cols(); }
  int dim() const noexcept { return static_cast<int>(states_.cols()); }
  int max_delay() const noexcept { return max_delay_; }
  double dt() const noexcept { return dt_; }

  /// Theta_n, n in [0, max_delay].
  auto theta(int n) const {
    check_delay(n, 0);
    return phi_.middleRows(n, rows());
  }

  /// D^i_n for every component i as an N x d matrix, n in [1, max_delay].
  Matrix increments(int n) const {
    check_delay(n, 1);
    return states_.middleRows(n, rows()) - states_.topRows(rows());
  }

  /// D^i_n.
  Vector increment(int component, int n) const {
    check_delay(n, 1);
    if (component < 0 || component >= dim())
      throw InvalidArgument("design set: component out of range");
    return states_.col(component).segment(n, rows()) - states_.col(component).head(rows());
  }

 private:
  void check_delay(int n, int lo) const {
    if (n < lo || n > max_delay_)
      throw InvalidArgument("design set: delay " + std::to_string(n) +
                            " outside [" + std::to_string(lo) + ", " +
                            std::to_string(max_delay_) + "]");
  }

  Matrix phi_;     // (N + max_delay) x k
  Matrix states_;  // (N + max_delay) x d
  int max_delay_;
  double dt_;
};

inline DesignSet build_design_set(const Dictionary& dict, const Trajectory& traj,
                                  int max_delay) {
  if (max_delay < 1) throw InvalidArgument("build_design_set: max_delay must be >= 1");
  if (dict.dim() != traj.dim())
    throw InvalidArgument("build_design_set: dictionary and trajectory dimensions differ");
  if (traj.size() < max_delay + 2)
    throw InvalidArgument("build_design_set: trajectory has " + std::to_string(traj.size()) +
                          " samples, need at least " + std::to_string(max_delay + 2));
  return DesignSet(dict.evaluate_rows(traj.states), traj.states, max_delay, traj.dt);
}

}  // namespace sde_sindy
