#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lmesens {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Matrix or array shapes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed case, config or report file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// One broken invariant of a case. `code` is stable and machine readable.
struct Violation {
  std::string code;
  std::string message;
  long index = -1;  // offending element (line, battery, node...), -1 if not applicable

  bool operator==(const Violation&) const = default;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// The dispatch problem has no feasible point, or the interior point
/// iteration failed to reach the requested tolerance.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A linear system required for differentiation is singular. `period` is
/// set when the failure happened in a per-period block, -1 otherwise.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what, long period = -1)
      : Error(what), period_(period) {}
  long period() const { return period_; }

 private:
  long period_;
};

}  // namespace lmesens
