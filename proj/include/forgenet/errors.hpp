#pragma once

#include <stdexcept>
#include <string>

namespace forgenet {

// Invalid user-supplied parameters or configuration. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Corrupt, truncated or incompatible persisted data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure at runtime (non-finite loss, diverging rollout).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace forgenet
