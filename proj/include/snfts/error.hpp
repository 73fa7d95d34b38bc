#pragma once

#include <stdexcept>
#include <string>

namespace snfts {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (grid length, matrix sizes, grid mismatch).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when the error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The self-normalizer (or another quadratic-form normalizer) is numerically singular.
class DegenerateNormalizer : public Error {
 public:
  explicit DegenerateNormalizer(double condition_number)
      : Error("degenerate normalizer (condition number " + std::to_string(condition_number) +
              ")"),
        condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

/// Division by a (near-)zero eigenvalue, e.g. in the eigenvalue-ratio statistic.
class SingularityError : public Error {
 public:
  using Error::Error;
};

}  // namespace snfts
