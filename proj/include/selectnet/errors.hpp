#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selectnet {

/// Inconsistent or invalid configuration, detected before any work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data handed to an operation violates its preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. a forward cache that does not belong to the model.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed dataset or config file. Carries the 1-based line (or byte
/// offset for binary files) where parsing stopped.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t location)
      : InputError(what), location_(location) {}

  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

}  // namespace selectnet
