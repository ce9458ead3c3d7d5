#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sde_sindy {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or precondition violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Euler-Maruyama produced a non-finite or runaway state.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A (restricted) normal system is numerically singular.
class SingularSystemError : public Error {
 public:
  SingularSystemError(std::string system, const std::string& what)
      : Error(what), system_(std::move(system)) {}
  const std::string& system() const noexcept { return system_; }

 private:
  std::string system_;
};

/// A model's drift or diffusion is not in the span of a dictionary.
class NotRepresentable : public Error {
 public:
  using Error::Error;
};

}  // namespace sde_sindy
