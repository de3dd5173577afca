#pragma once

#include <stdexcept>
#include <string>

namespace psync {

// Malformed input text. `line` is 1-based when known, 0 otherwise.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

// Structurally well-formed input that violates a model invariant
// (dangling branch endpoint, disconnected graph, duplicate measurement, ...).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure that is an error rather than an expected outcome
// (rank-deficient normal equations, nonfinite residuals, ...).
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace psync
