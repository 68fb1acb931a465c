#pragma once

#include <stdexcept>
#include <string>

namespace hwnas {

/// Bad input: out-of-range parameter, malformed file, inconsistent shapes.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A HwConfig parameter lies outside its allowed range.
class RangeError : public ValidationError {
 public:
  explicit RangeError(const std::string& what) : ValidationError(what) {}
};

/// No tiling of a layer fits the buffers of a configuration.
class InfeasibleWorkload : public std::runtime_error {
 public:
  explicit InfeasibleWorkload(const std::string& what) : std::runtime_error(what) {}
};

class UnsupportedSetting : public ValidationError {
 public:
  explicit UnsupportedSetting(const std::string& what) : ValidationError(what) {}
};

/// Optimization diverged (NaN loss or parameters).
class TrainingFailure : public std::runtime_error {
 public:
  explicit TrainingFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hwnas
