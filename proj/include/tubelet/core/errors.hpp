#pragma once

#include <stdexcept>
#include <string>

namespace tubelet {

// Invalid configuration: bad extents, unsupported scales, variant mismatches.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or unreadable files, missing container entries.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between tensors in an operation.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (NaN loss, bad gradients).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tubelet
