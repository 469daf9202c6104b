#pragma once

#include <stdexcept>
#include <string>

namespace corrport {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A market or grid parameter violates one of its invariants.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// The correlation bound is at or beyond the admissibility bound, so no
/// strategy can reach the required negative correlation.
class InadmissibleDelta : public Error {
 public:
  InadmissibleDelta(const std::string& what, double bound)
      : Error(what), bound_(bound) {}
  double bound() const noexcept { return bound_; }

 private:
  double bound_;
};

/// Correlation requested where one of the variances is zero.
class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// Enumeration would exceed the supported horizon.
class HorizonTooLarge : public Error {
 public:
  using Error::Error;
};

/// No grid point satisfies the correlation constraint.
class EmptyFeasibleSet : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a formula (e.g. |theta sqrt(h)| >= 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace corrport
