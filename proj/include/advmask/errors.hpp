#pragma once

#include <stdexcept>

namespace advmask {

// Configuration problems: unknown keys, invalid hyperparameters,
// inconsistent flag combinations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input-data problems: malformed files, missing fields, out-of-range ids,
// missing artifacts on disk.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures: NaN gradients, divergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace advmask
