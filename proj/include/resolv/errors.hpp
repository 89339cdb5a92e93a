#pragma once

#include <stdexcept>
#include <string>

namespace resolv {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed textual input (DIMACS, trace, assignment, manifest). Carries the
// 1-based line number where parsing failed, 0 when not line-addressable.
class SyntaxError : public Error {
 public:
  SyntaxError(int line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line(line) {}
  int line;
};

// Literal references a variable outside [1, num_vars].
class VarOutOfRange : public Error {
 public:
  explicit VarOutOfRange(const std::string& msg) : Error(msg) {}
};

// resolve() called with a pivot that does not occur with opposite parity
// across the two clauses.
class PivotAbsent : public Error {
 public:
  explicit PivotAbsent(const std::string& msg) : Error(msg) {}
};

// Trace line references a clause id that has not been defined yet.
class DanglingParent : public Error {
 public:
  DanglingParent(int line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line(line) {}
  int line;
};

// prune_proof_dag() called on a derivation that never reaches the empty
// clause.
class NoEmptyClause : public Error {
 public:
  explicit NoEmptyClause(const std::string& msg) : Error(msg) {}
};

// Tensor operation with incompatible operand shapes.
class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

// A tensor operation produced NaN or Inf while finite checking was enabled.
class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& msg) : Error(msg) {}
};

// Pair selection requested while the clause pool admits no valid
// resolution step.
class NoValidPair : public Error {
 public:
  explicit NoValidPair(const std::string& msg) : Error(msg) {}
};

// A certificate step is unplayable under the policy's validity mask; this
// signals corrupt training data, not a model failure.
class TeacherStepInvalid : public Error {
 public:
  explicit TeacherStepInvalid(const std::string& msg) : Error(msg) {}
};

// Solver exceeded its decision budget.
class ResourceLimitExceeded : public Error {
 public:
  explicit ResourceLimitExceeded(const std::string& msg) : Error(msg) {}
};

// Formula-pair generation could not re-verify a satisfiable twin.
class GenerationStall : public Error {
 public:
  explicit GenerationStall(const std::string& msg) : Error(msg) {}
};

// I/O failure (missing file, unwritable path, bad checkpoint container).
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace resolv
