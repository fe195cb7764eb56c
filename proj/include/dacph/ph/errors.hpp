#pragma once

#include <stdexcept>
#include <string>

namespace dacph {

// Raised when vector/matrix shapes do not agree with the model dimensions.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when a NaN or infinity shows up anywhere in a simulation quantity.
// Episode runners catch this and truncate/flag the log instead of
// propagating NaN downstream.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}

  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// Raised for invalid user configuration (bad ranges, unknown keys, ...).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace dacph
