#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dictionary.hpp"

namespace sde_sindy {

/// Generalized normal system A * X = B. Column c of B is the right-hand side
/// for target_labels[c] (a drift component or a diffusion pair i >= j).
struct LinearSystem {
  std::string name;
  Matrix A;
  Matrix B;
  std::vector<std::string> target_labels;

  Eigen::Index rhs_count() const noexcept { return B.cols(); }
};

enum class Target { drift, diffusion };

inline std::string_view to_string(Target t) {
  return t == Target::drift ? "drift" : "diffusion";
}

enum class MethodKind {
  drift_fd1,
  drift_fd2,
  drift_trap,
  drift_general,
  diff_fd1,
  diff_drift_sub,
  diff_fd2,
  diff_trap,
};

inline constexpr MethodKind kAllMethodKinds[] = {
    MethodKind::drift_fd1,  MethodKind::drift_fd2,      MethodKind::drift_trap,
    MethodKind::drift_general, MethodKind::diff_fd1, MethodKind::diff_drift_sub,
    MethodKind::diff_fd2,   MethodKind::diff_trap};

inline std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::drift_fd1: return "drift_fd1";
    case MethodKind::drift_fd2: return "drift_fd2";
    case MethodKind::drift_trap: return "drift_trap";
    case MethodKind::drift_general: return "drift_general";
    case MethodKind::diff_fd1: return "diff_fd1";
    case MethodKind::diff_drift_sub: return "diff_drift_sub";
    case MethodKind::diff_fd2: return "diff_fd2";
    case MethodKind::diff_trap: return "diff_trap";
  }
  return "";
}

inline std::optional<MethodKind> parse_method_kind(std::string_view s) {
  for (MethodKind k : kAllMethodKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline Target target_of(MethodKind k) {
  switch (k) {
    case MethodKind::drift_fd1:
    case MethodKind::drift_fd2:
    case MethodKind::drift_trap:
    case MethodKind::drift_general:
      return Target::drift;
    default:
      return Target::diffusion;
  }
}

/// Number of samples past t_m a method reads.
inline int required_delay(MethodKind k) {
  switch (k) {
    case MethodKind::drift_fd2:
    case MethodKind::diff_fd2:
      return 2;
    default:
      return 1;
  }
}

/// Estimation method. For drift_general,
///   sum_{l=0..K} a_l mu(X_{t+l}) ~ sum_{l=1..p} b_l (X_{t+l} - X_t),
/// with lmm_a = (a_0..a_K) and lmm_b = (b_1..b_p) in absolute units (the b_l
/// carry their 1/dt factors).
struct MethodSpec {
  MethodKind kind = MethodKind::drift_fd1;
  std::vector<double> lmm_a;
  std::vector<double> lmm_b;

  static MethodSpec of(MethodKind k) {
    if (k == MethodKind::drift_general)
      throw InvalidArgument("drift_general needs coefficient lists; use MethodSpec::general");
    return MethodSpec{k, {}, {}};
  }

  static MethodSpec general(std::vector<double> a, std::vector<double> b) {
    MethodSpec s{MethodKind::drift_general, std::move(a), std::move(b)};
    s.validate();
    return s;
  }

  Target target() const { return target_of(kind); }

  int max_delay() const {
    if (kind != MethodKind::drift_general) return required_delay(kind);
    const int a_max = lmm_a.empty() ? 0 : static_cast<int>(lmm_a.size()) - 1;
    return std::max(1, std::max(a_max, static_cast<int>(lmm_b.size())));
  }

  void validate() const {
    const bool has = !lmm_a.empty() || !lmm_b.empty();
    if (kind != MethodKind::drift_general) {
      if (has) throw InvalidArgument("only drift_general takes multistep coefficients");
      return;
    }
    if (lmm_a.empty() || lmm_b.empty())
      throw InvalidArgument("drift_general: coefficient lists must be non-empty");
    if (std::all_of(lmm_a.begin(), lmm_a.end(), [](double v) { return v == 0.0; }))
      throw InvalidArgument("drift_general: all-zero a coefficients give a singular system");
  }
};

/// Diffusion targets (i, j) with i >= j, ordered (0,0), (1,0), (1,1), (2,0), ...
inline std::vector<std::pair<int, int>> diffusion_pairs(int dim) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) out.emplace_back(i, j);
  return out;
}

inline std::vector<std::string> drift_target_labels(int dim) {
  std::vector<std::string> out;
  for (int i = 0; i < dim; ++i) out.push_back("mu[" + std::to_string(i + 1) + "]");
  return out;
}

inline std::vector<std::string> diffusion_target_labels(int dim) {
  std::vector<std::string> out;
  for (const auto& [i, j] : diffusion_pairs(dim))
    out.push_back("Sigma[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
  return out;
}

/// Columns R^i (.) S^j for every pair i >= j.
inline Matrix pair_products(const Matrix& R, const Matrix& S) {
  const auto pairs = diffusion_pairs(static_cast<int>(R.cols()));
  Matrix out(R.rows(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t c = 0; c < pairs.size(); ++c)
    out.col(static_cast<Eigen::Index>(c)) =
        R.col(pairs[c].first).cwiseProduct(S.col(pairs[c].second));
  return out;
}

/// Drift values theta(X_{t_m}) alpha and theta(X_{t_{m+1}}) alpha along the
/// design rows. The drift dictionary may differ from the diffusion one as
/// long as both design sets come from the same trajectory.
struct DriftSamples {
  Matrix at0;  // N x d
  Matrix at1;  // N x d

  static DriftSamples from(const DesignSet& drift_ds, const Matrix& alpha) {
    if (alpha.rows() != drift_ds.size() || alpha.cols() != drift_ds.dim())
      throw InvalidArgument("drift coefficients must be " + std::to_string(drift_ds.size()) +
                            " x " + std::to_string(drift_ds.dim()) + ", got " +
                            std::to_string(alpha.rows()) + " x " +
                            std::to_string(alpha.cols()));
    return DriftSamples{drift_ds.theta(0) * alpha, drift_ds.theta(1) * alpha};
  }
};

/// Assembles the normal systems of every estimator on one design set.
/// Shared products (Theta_0^T Theta_l, increments) are computed once and
/// reused, so assembling several methods on the same data is cheap. Not
/// thread-safe; create one per worker.
class SystemAssembler {
 public:
  explicit SystemAssembler(const DesignSet& ds) : ds_(ds) {}

  const DesignSet& design() const noexcept { return ds_; }

  /// Theta_0^T Theta_0 alpha = (1/dt) Theta_0^T D_1
  LinearSystem drift_fd1() {
    return drift_system("drift_fd1", cross_gram(0), (1.0 / dt()) * projected_increments(1));
  }

  /// Theta_0^T Theta_0 alpha = (1/(2dt)) Theta_0^T (4 D_1 - D_2)
  LinearSystem drift_fd2() {
    // Distributed as (2/dt) P_1 - (1/(2dt)) P_2 so drift_general reproduces it bit for bit.
    Matrix B = (2.0 / dt()) * projected_increments(1);
    B -= (1.0 / (2.0 * dt())) * projected_increments(2);
    return drift_system("drift_fd2", cross_gram(0), std::move(B));
  }

  /// 1/2 Theta_0^T (Theta_0 + Theta_1) alpha = (1/dt) Theta_0^T D_1.
  /// The left factor stays Theta_0^T: projecting with (Theta_0 + Theta_1)^T
  /// makes the sums converge to a Stratonovich integral.
  LinearSystem drift_trapezoidal() {
    Matrix A = 0.5 * cross_gram(0);
    A += 0.5 * cross_gram(1);
    return drift_system("drift_trap", std::move(A), (1.0 / dt()) * projected_increments(1));
  }

  /// (sum_l a_l Theta_0^T Theta_l) alpha = sum_l b_l Theta_0^T D_l
  LinearSystem drift_general(const MethodSpec& spec) {
    if (spec.kind != MethodKind::drift_general)
      throw InvalidArgument("drift_general: spec kind must be drift_general");
    spec.validate();
    if (spec.max_delay() > ds_.max_delay())
      throw InvalidArgument("drift_general: coefficients reach delay " +
                            std::to_string(spec.max_delay()) + " but the design set stops at " +
                            std::to_string(ds_.max_delay()));
    std::optional<Matrix> A;
    for (std::size_t l = 0; l < spec.lmm_a.size(); ++l) {
      if (spec.lmm_a[l] == 0.0) continue;
      if (A) *A += spec.lmm_a[l] * cross_gram(static_cast<int>(l));
      else A = spec.lmm_a[l] * cross_gram(static_cast<int>(l));
    }
    std::optional<Matrix> B;
    for (std::size_t l = 0; l < spec.lmm_b.size(); ++l) {
      if (spec.lmm_b[l] == 0.0) continue;
      const int n = static_cast<int>(l) + 1;
      if (B) *B += spec.lmm_b[l] * projected_increments(n);
      else B = spec.lmm_b[l] * projected_increments(n);
    }
    if (!B) B = Matrix::Zero(ds_.size(), ds_.dim());
    return drift_system("drift_general", std::move(*A), std::move(*B));
  }

  /// Theta_0^T Theta_0 beta = (1/(2dt)) Theta_0^T (D^i_1 (.) D^j_1)
  LinearSystem diffusion_fd1() {
    const Matrix& D1 = increments(1);
    return diffusion_system("diff_fd1", cross_gram(0),
                            (1.0 / (2.0 * dt())) * project(pair_products(D1, D1)));
  }

  /// Theta_0^T Theta_0 beta = (1/(2dt)) Theta_0^T (R^i (.) R^j),
  /// R = D_1 - dt * mu(X_t).
  LinearSystem diffusion_drift_sub(const DriftSamples& drift) {
    check_samples(drift);
    const Matrix R = increments(1) - dt() * drift.at0;
    return diffusion_system("diff_drift_sub", cross_gram(0),
                            (1.0 / (2.0 * dt())) * project(pair_products(R, R)));
  }

  LinearSystem diffusion_drift_sub(const Matrix& alpha) {
    return diffusion_drift_sub(DriftSamples::from(ds_, alpha));
  }

  /// Theta_0^T Theta_0 beta = (1/(4dt)) Theta_0^T (4 D^i_1 (.) D^j_1 - D^i_2 (.) D^j_2)
  LinearSystem diffusion_fd2() {
    const Matrix& D1 = increments(1);
    const Matrix& D2 = increments(2);
    Matrix H = 4.0 * pair_products(D1, D1);
    H -= pair_products(D2, D2);
    return diffusion_system("diff_fd2", cross_gram(0), (1.0 / (4.0 * dt())) * project(H));
  }

  /// Theta_0^T (Theta_0 + Theta_1) beta = (1/dt) Theta_0^T (R^i (.) R^j),
  /// R = D_1 - dt/2 (mu(X_t) + mu(X_{t+dt})).
  LinearSystem diffusion_trapezoidal(const DriftSamples& drift) {
    check_samples(drift);
    const Matrix R = increments(1) - (0.5 * dt()) * (drift.at0 + drift.at1);
    Matrix A = cross_gram(0);
    A += cross_gram(1);
    return diffusion_system("diff_trap", std::move(A),
                            (1.0 / dt()) * project(pair_products(R, R)));
  }

  LinearSystem diffusion_trapezoidal(const Matrix& alpha) {
    return diffusion_trapezoidal(DriftSamples::from(ds_, alpha));
  }

  /// Any method. Drift-corrected diffusion methods need `drift`.
  LinearSystem assemble(const MethodSpec& spec, const DriftSamples* drift = nullptr) {
    switch (spec.kind) {
      case MethodKind::drift_fd1: return drift_fd1();
      case MethodKind::drift_fd2: return drift_fd2();
      case MethodKind::drift_trap: return drift_trapezoidal();
      case MethodKind::drift_general: return drift_general(spec);
      case MethodKind::diff_fd1: return diffusion_fd1();
      case MethodKind::diff_fd2: return diffusion_fd2();
      case MethodKind::diff_drift_sub:
      case MethodKind::diff_trap:
        if (drift == nullptr)
          throw InvalidArgument(std::string(to_string(spec.kind)) + " needs a drift estimate");
        return spec.kind == MethodKind::diff_trap ? diffusion_trapezoidal(*drift)
                                                  : diffusion_drift_sub(*drift);
    }
    throw InvalidArgument("unknown method");
  }

  /// Theta_0^T Theta_n.
  const Matrix& cross_gram(int n) {
    auto it = grams_.find(n);
    if (it != grams_.end()) return it->second;
    const auto T0 = ds_.theta(0);
    Matrix G;
    if (n == 0) {
      const Eigen::Index k = ds_.size();
      G = Matrix::Zero(k, k);
      G.selfadjointView<Eigen::Lower>().rankUpdate(T0.transpose());
      G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    } else {
      G = T0.transpose() * ds_.theta(n);
    }
    return grams_.emplace(n, std::move(G)).first->second;
  }

  /// D_n (N x d).
  const Matrix& increments(int n) {
    auto it = increments_.find(n);
    if (it != increments_.end()) return it->second;
    return increments_.emplace(n, ds_.increments(n)).first->second;
  }

  /// Theta_0^T D_n.
  const Matrix& projected_increments(int n) {
    auto it = projected_.find(n);
    if (it != projected_.end()) return it->second;
    return projected_.emplace(n, project(increments(n))).first->second;
  }

 private:
  double dt() const { return ds_.dt(); }

  Matrix project(const Matrix& H) const { return ds_.theta(0).transpose() * H; }

  void check_samples(const DriftSamples& s) const {
    if (s.at0.rows() != ds_.rows() || s.at1.rows() != ds_.rows() ||
        s.at0.cols() != ds_.dim() || s.at1.cols() != ds_.dim())
      throw InvalidArgument("drift samples do not match the design set shape");
  }

  LinearSystem drift_system(std::string name, Matrix A, Matrix B) const {
    return LinearSystem{std::move(name), std::move(A), std::move(B),
                        drift_target_labels(ds_.dim())};
  }

  LinearSystem diffusion_system(std::string name, Matrix A, Matrix B) const {
    return LinearSystem{std::move(name), std::move(A), std::move(B),
                        diffusion_target_labels(ds_.dim())};
  }

  const DesignSet& ds_;
  std::map<int, Matrix> grams_;
  std::map<int, Matrix> increments_;
  std::map<int, Matrix> projected_;
};

// Free-function forms.

inline LinearSystem drift_fd1(const DesignSet& ds) { return SystemAssembler(ds).drift_fd1(); }
inline LinearSystem drift_fd2(const DesignSet& ds) { return SystemAssembler(ds).drift_fd2(); }
inline LinearSystem drift_trapezoidal(const DesignSet& ds) {
  return SystemAssembler(ds).drift_trapezoidal();
}
inline LinearSystem drift_general(const DesignSet& ds, const MethodSpec& spec) {
  return SystemAssembler(ds).drift_general(spec);
}
inline LinearSystem diffusion_fd1(const DesignSet& ds) {
  return SystemAssembler(ds).diffusion_fd1();
}
inline LinearSystem diffusion_fd2(const DesignSet& ds) {
  return SystemAssembler(ds).diffusion_fd2();
}
/// `alpha` (k x d) is a drift estimate in the same dictionary as `ds`.
inline LinearSystem diffusion_drift_sub(const DesignSet& ds, const Matrix& alpha) {
  return SystemAssembler(ds).diffusion_drift_sub(alpha);
}
/// Drift estimated in a separate dictionary (`drift_ds`, same trajectory).
inline LinearSystem diffusion_drift_sub(const DesignSet& ds, const DesignSet& drift_ds,
                                        const Matrix& alpha) {
  return SystemAssembler(ds).diffusion_drift_sub(DriftSamples::from(drift_ds, alpha));
}
inline LinearSystem diffusion_trapezoidal(const DesignSet& ds, const Matrix& alpha) {
  return SystemAssembler(ds).diffusion_trapezoidal(alpha);
}
inline LinearSystem diffusion_trapezoidal(const DesignSet& ds, const DesignSet& drift_ds,
                                          const Matrix& alpha) {
  return SystemAssembler(ds).diffusion_trapezoidal(DriftSamples::from(drift_ds, alpha));
}

}  // namespace sde_sindy
