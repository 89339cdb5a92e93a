#pragma once

#include <cstdint>

#include "resolv/cnf.hpp"

namespace resolv {

struct SolverLimits {
  int64_t max_decisions = 0;  // 0 = unlimited
};

struct SolverStats {
  int64_t decisions = 0;
  int64_t propagations = 0;
  double wall_ms = 0;
};

struct SolveResult {
  bool sat = false;
  Assignment assignment;   // complete iff sat
  ResolutionProof proof;   // pruned, ends in the empty clause, iff unsat and logging was on
  SolverStats stats;
};

// Complete DPLL over f.input_clauses (derived clauses are ignored) with unit
// propagation and a fixed branching heuristic: lowest-index unassigned
// variable, true first. Deterministic for a given formula.
//
// With log_proof, every conflict is regressed to a decisions-only clause by
// resolving against propagation antecedents (most recent first) and the two
// branch conflicts of a decision are resolved on the decision variable; the
// recorded resolutions, pruned to the ancestors of the final empty clause,
// form the returned certificate. Resolvents syntactically equal to an
// existing pool clause reuse its id, so certificates never contain duplicate
// clauses. Pure-literal elimination runs only when proof logging is off
// (verdicts are unaffected; the probing path is just faster).
//
// Throws ResourceLimitExceeded when the decision budget is exhausted.
SolveResult solve(const CnfFormula& f, bool log_proof,
                  const SolverLimits& lim = {});

}  // namespace resolv
