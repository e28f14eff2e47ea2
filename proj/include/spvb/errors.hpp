#ifndef SPVB_ERRORS_HPP
#define SPVB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spvb {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an interface contract (dimension mismatch, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Floating point breakdown: failed factorization, non-finite ELBO term, ...
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Linear predictor ran away (e^xi would overflow).
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Adaptive quadrature could not reach the requested tolerance.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double partial, double error_estimate)
      : NumericalError(what), partial_(partial), error_estimate_(error_estimate) {}
  double partial() const noexcept { return partial_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double partial_;
  double error_estimate_;
};

/// Predictive enumeration hit its support cap before collecting enough mass.
class TruncationError : public NumericalError {
 public:
  TruncationError(const std::string& what, double accumulated)
      : NumericalError(what), accumulated_(accumulated) {}
  double accumulated() const noexcept { return accumulated_; }

 private:
  double accumulated_;
};

/// Random-walk sampler never reached a usable acceptance rate.
class TuningError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row, long column)
      : Error(what), row_(row), column_(column) {}
  long row() const noexcept { return row_; }
  long column() const noexcept { return column_; }

 private:
  long row_;
  long column_;
};

}  // namespace spvb

#endif  // SPVB_ERRORS_HPP
