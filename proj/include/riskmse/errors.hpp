#pragma once

#include <stdexcept>
#include <string>

namespace riskmse {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed arguments: non-finite inputs, dimension mismatches, observations
// outside the numeric support of a posterior, bad parameter values.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An iterative routine ran out of budget before reaching the requested
// tolerance. Carries the best estimate produced so far.
class AccuracyFailure : public Error {
 public:
  AccuracyFailure(const std::string& what, double best_estimate)
      : Error(what), best_estimate(best_estimate) {}
  double best_estimate;
};

// A variance constraint cannot be met by any estimator on the optimal curve.
// Carries the variance floor achieved at the endpoint of the curve.
class InfeasibleConstraint : public Error {
 public:
  InfeasibleConstraint(const std::string& what, double sev_floor)
      : Error(what), sev_floor(sev_floor) {}
  double sev_floor;
};

// Two computation routes that must agree disagreed beyond tolerance.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// A requested quantity is undefined for the given inputs (for example a
// localization scale when the optimal curve degenerates to a point).
class UndefinedQuantity : public Error {
 public:
  using Error::Error;
};

// File parsing or writing problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (unknown keys, malformed values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace riskmse
