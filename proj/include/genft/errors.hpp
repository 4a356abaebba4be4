#pragma once

#include <stdexcept>
#include <string>

namespace genft {

/// Base class for every error thrown by the library. The C API maps each
/// subclass onto a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is outside its allowed set or range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation precondition (e.g. non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A requested parameter budget has no nonnegative solution.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during optimisation (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace genft
