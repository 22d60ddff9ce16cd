#pragma once

#include <stdexcept>
#include <string>

namespace brpo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (dimensions, ranges, stochasticity).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Confidence table does not satisfy the per-state equality or box constraints.
class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed in a way that should be impossible for valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content; the message carries the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace brpo
