#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advsparse {

// Error taxonomy shared by the library and the CLI. The CLI maps UsageError,
// ParseError and UnsupportedVersion to exit code 2 and the numeric family to 3.

class InvalidDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

class AttackError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConsistencyError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Raised when an operation requires a non-empty adversarial set.
class RobustPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string location)
      : std::runtime_error(what + " (at " + location + ")"), location_(std::move(location)) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class UnsupportedVersion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace advsparse
