#pragma once

#include <stdexcept>
#include <string>

namespace signfac {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  usage = 2,
  parse = 3,
  precondition = 4,
  non_convergence = 5,
  hypothesis_violation = 6,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::parse: return "parse";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::hypothesis_violation: return "hypothesis_violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorKind::parse, what) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::precondition, what) {}
};

struct NonConvergenceError : Error {
  explicit NonConvergenceError(const std::string& what) : Error(ErrorKind::non_convergence, what) {}
};

/// The input does not satisfy the structural hypotheses of the algorithm
/// (e.g. no Schur-independent factorization exists). Carries a residual when
/// one was measured.
struct HypothesisViolation : Error {
  HypothesisViolation(const std::string& what, double residual = -1.0)
      : Error(ErrorKind::hypothesis_violation, what), residual(residual) {}
  double residual;
};

}  // namespace signfac
