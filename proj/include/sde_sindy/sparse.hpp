#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "estimators.hpp"

namespace sde_sindy {

/// Reciprocal condition estimates below this are treated as singular.
inline constexpr double kMinReciprocalCondition = 1e-12;

/// LU factorization with partial pivoting of a (possibly non-symmetric)
/// normal matrix, after symmetric diagonal scaling. Immutable once built, so
/// one instance can serve concurrent solves.
class DenseSolver {
 public:
  DenseSolver(const Matrix& A, std::string name = "system") : name_(std::move(name)) {
    if (A.rows() != A.cols() || A.rows() == 0)
      throw InvalidArgument(name_ + ": normal matrix must be square and non-empty");
    if (!A.allFinite())
      throw SingularSystemError(name_, name_ + ": normal matrix has non-finite entries");
    scale_.resize(A.rows());
    for (Eigen::Index j = 0; j < A.rows(); ++j) {
      const double d = std::abs(A(j, j));
      scale_(j) = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
    }
    lu_.compute(scale_.asDiagonal() * A * scale_.asDiagonal());
    rcond_ = lu_.rcond();
    if (!(rcond_ > kMinReciprocalCondition))
      throw SingularSystemError(
          name_, name_ + ": numerically singular (reciprocal condition " +
                     std::to_string(rcond_) + ")");
  }

  Vector solve(const Vector& b) const {
    return scale_.asDiagonal() * lu_.solve(scale_.asDiagonal() * b);
  }

  Matrix solve(const Matrix& B) const {
    return scale_.asDiagonal() * lu_.solve(scale_.asDiagonal() * B);
  }

  double rcond() const noexcept { return rcond_; }

 private:
  std::string name_;
  Vector scale_;
  Eigen::PartialPivLU<Matrix> lu_;
  double rcond_ = 0.0;
};

inline void check_rhs(const LinearSystem& sys, Eigen::Index rhs_index) {
  if (rhs_index < 0 || rhs_index >= sys.rhs_count())
    throw InvalidArgument(sys.name + ": right-hand side " + std::to_string(rhs_index) +
                          " out of range");
  if (sys.A.rows() != sys.B.rows())
    throw InvalidArgument(sys.name + ": A and B row counts differ");
}

inline Vector solve_dense(const LinearSystem& sys, Eigen::Index rhs_index) {
  check_rhs(sys, rhs_index);
  return DenseSolver(sys.A, sys.name).solve(Vector(sys.B.col(rhs_index)));
}

/// Every right-hand side against one factorization; k x m.
inline Matrix solve_dense_all(const LinearSystem& sys) {
  if (sys.A.rows() != sys.B.rows())
    throw InvalidArgument(sys.name + ": A and B row counts differ");
  return DenseSolver(sys.A, sys.name).solve(sys.B);
}

struct SparseSolution {
  Vector coeffs;
  std::vector<Eigen::Index> support;
  int iterations = 0;
  bool converged = false;
};

inline constexpr int kDefaultStlsIterations = 20;

/// Sequentially thresholded least squares on a normal system: solve on the
/// current support (rows and columns of A, rows of b), drop every
/// coefficient with |v_j| < lambda, repeat until the support settles.
inline SparseSolution stls(const LinearSystem& sys, Eigen::Index rhs_index, double lambda,
                           int max_iter = kDefaultStlsIterations) {
  check_rhs(sys, rhs_index);
  if (!(lambda >= 0.0)) throw InvalidArgument("stls: lambda must be >= 0");
  if (max_iter < 1) throw InvalidArgument("stls: max_iter must be >= 1");

  const Eigen::Index k = sys.A.rows();
  const Vector b = sys.B.col(rhs_index);
  SparseSolution out;
  out.coeffs = Vector::Zero(k);
  std::vector<Eigen::Index> support(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) support[static_cast<std::size_t>(j)] = j;

  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    Vector v;
    if (static_cast<Eigen::Index>(support.size()) == k) {
      v = DenseSolver(sys.A, sys.name).solve(b);
    } else {
      v = DenseSolver(sys.A(support, support), sys.name + " (restricted)").solve(Vector(b(support)));
    }
    std::vector<Eigen::Index> kept;
    out.coeffs.setZero();
    for (std::size_t s = 0; s < support.size(); ++s) {
      const double c = v(static_cast<Eigen::Index>(s));
      if (std::abs(c) >= lambda) {
        kept.push_back(support[s]);
        out.coeffs(support[s]) = c;
      }
    }
    if (kept.empty()) {
      out.support.clear();
      out.converged = true;
      return out;
    }
    const bool settled = kept.size() == support.size();
    support = std::move(kept);
    if (settled) {
      out.support = support;
      out.converged = true;
      return out;
    }
  }
  out.support = support;
  out.converged = false;
  return out;
}

enum class SolverKind { dense, stls };

struct SolverSettings {
  SolverKind kind = SolverKind::dense;
  double lambda = 0.0;
  int max_iter = kDefaultStlsIterations;
};

/// Coefficients for every right-hand side (k x m).
inline Matrix solve_system(const LinearSystem& sys, const SolverSettings& settings) {
  if (settings.kind == SolverKind::dense) return solve_dense_all(sys);
  Matrix out(sys.A.rows(), sys.rhs_count());
  for (Eigen::Index c = 0; c < sys.rhs_count(); ++c)
    out.col(c) = stls(sys, c, settings.lambda, settings.max_iter).coeffs;
  return out;
}

}  // namespace sde_sindy
