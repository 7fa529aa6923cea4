#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace topopt {

/// Base class for all errors raised by the library. Carries the optimization
/// iteration at which the failure surfaced, when known.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;

  void set_iteration(int k) { iteration_ = k; }
  [[nodiscard]] std::optional<int> iteration() const { return iteration_; }

 private:
  std::optional<int> iteration_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. a density
/// outside [0, 1]).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to meet its residual contract.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  [[nodiscard]] double residual() const { return residual_; }

 private:
  double residual_;
};

/// Matrix failed a structural requirement (not SPD, singular pivot, ...).
class MatrixError : public Error {
 public:
  using Error::Error;
};

}  // namespace topopt
