#pragma once

#include <stdexcept>
#include <string>

namespace steel {

// Bad input: malformed files, shape violations, unknown config keys.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failures while executing: I/O, non-finite numerics.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class NumericError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace steel
