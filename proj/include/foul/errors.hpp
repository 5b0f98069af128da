#pragma once

#include <stdexcept>
#include <string>

namespace foul {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or layout mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Unknown name (segment, domain id, config key target, ...).
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or otherwise unusable numerics.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent dataset operations.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Batch cannot support the requested loss (e.g. too few classes).
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration file or incompatible option combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace foul
