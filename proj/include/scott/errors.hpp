#pragma once

#include <stdexcept>
#include <string>

namespace scott {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

/// Incompatible tensor extents.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Image or grid geometry that does not tile (e.g. size not divisible by the patch size).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse: backward on a non-scalar, a consumed tape, and similar.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or unknown configuration key/value.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : std::invalid_argument(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Parameter collections that do not line up (EMA, optimizer, checkpoint restore).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupted, truncated, or mismatched checkpoint file.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or unreadable dataset.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerically degenerate input (zero variance, too few rows).
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scott
