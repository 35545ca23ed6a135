#pragma once

#include <stdexcept>
#include <string>

namespace iotids {

// Argument/shape contract violations are reported with std::invalid_argument.
// The types below classify failures that originate in configuration, input
// data, or numerics, so callers (the CLI) can map them to exit codes.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iotids
