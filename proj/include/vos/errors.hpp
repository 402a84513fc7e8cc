#pragma once

#include <stdexcept>
#include <string>

namespace vos {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched vector/matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition (labels, binary columns, class counts).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An API was used out of order, e.g. backward without forward.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Loss or gradient became NaN/Inf during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A computed loss term is not finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, CSV or model file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Every candidate of an architecture search failed.
class SearchError : public Error {
 public:
  using Error::Error;
};

/// Test rows reached an oversampler.
class LeakageError : public Error {
 public:
  using Error::Error;
};

}  // namespace vos
