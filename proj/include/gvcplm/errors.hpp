#ifndef GVCPLM_ERRORS_HPP
#define GVCPLM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gvcplm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid tuning parameter or configuration value (h <= 0, delta <= 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CSV problems, dimension mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A response value outside the family's support.
class DomainError : public DataError {
 public:
  DomainError(const std::string& what, long index)
      : DataError(what + " (observation " + std::to_string(index) + ")"),
        index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

/// Linear hypothesis rows that are not linearly independent.
class RankError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Too few observations with positive kernel weight around an evaluation point.
class EffectiveSampleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Local information matrix could not be regularised.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A matrix that must be negative definite is not (numerically).
class ConditioningError : public NumericalError {
 public:
  ConditioningError(const std::string& what, double condition = 0.0)
      : NumericalError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace gvcplm

#endif  // GVCPLM_ERRORS_HPP
