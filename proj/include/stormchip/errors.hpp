#pragma once

#include <stdexcept>
#include <string>

namespace stormchip {

// Bad tensor extents or mismatched operand shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument values outside their documented domain (labels, rates, sizes).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation was asked to do something it does not support for this input.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Unreadable, missing, or malformed input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A checkpoint that fails structural validation.
class CorruptionError : public DataError {
 public:
  using DataError::DataError;
};

// Bad or unknown configuration keys/values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stormchip
