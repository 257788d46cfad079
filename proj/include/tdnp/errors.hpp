// errors.hpp - exception types. Each maps onto one CLI exit code.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tdnp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Two inputs are individually valid but cannot hold together
/// (e.g. T_1 <= T_R leaves no positive paramagnetic relaxation time).
class InconsistencyError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Malformed input text. `line` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line > 0 ? ":" + std::to_string(line) : std::string{}) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Bad command-line usage (unknown sweep parameter, missing option).
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tdnp
