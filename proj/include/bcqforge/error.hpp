#pragma once

#include <stdexcept>
#include <string>

namespace bcqforge {

/// Invalid configuration: bad hyperparameters, shape mismatches, topology mismatches.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input data or out-of-range arguments.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed trajectory or schema files.
class IngestionError : public InputError {
 public:
  using InputError::InputError;
};

/// API misuse, e.g. calling backward on a value that was never recorded.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training produced NaN/Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bcqforge
