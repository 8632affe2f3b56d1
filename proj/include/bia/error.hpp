#pragma once

#include <stdexcept>
#include <string>

namespace bia {

/// Raised when an argument lies outside its documented domain.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a linear-algebra step cannot produce a trustworthy result.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a brute-force routine is asked for more work than it supports.
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};

struct ConfigError : std::runtime_error {
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace bia
