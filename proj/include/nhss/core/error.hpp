#pragma once

#include <stdexcept>
#include <string>

namespace nhss {

/// Invalid user-facing configuration (tree shape, ranks, config keys).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand extents do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing, truncated or malformed files on disk.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during a computation (singular solve, divergence, ...).
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nhss
