#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace rpcompass {

/// Bad caller input: wrong dimensions, out-of-range parameters.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Model file could not be parsed. Carries the offending line and field.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, std::string field, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": field '" + field + "': " + what),
        source_(std::move(source)),
        line_(line),
        field_(std::move(field)) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

/// A parsed model violates a physical invariant (rates, EED symmetry, ...).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string invariant, const std::string& what)
      : std::runtime_error(invariant + ": " + what), invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// Hilbert dimension exceeds the configured cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solver failed to reach the requested accuracy.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Steady-state generator is not invertible (k_f = 0).
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimal estimator requested at zero quantum Fisher information.
class UndefinedEstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rpcompass
