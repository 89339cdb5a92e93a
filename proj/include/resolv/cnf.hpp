#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resolv/errors.hpp"

namespace resolv {

// Literals are nonzero DIMACS-style integers: +v / -v for variable v >= 1.
inline int lit_var(int lit) { return lit < 0 ? -lit : lit; }
inline bool lit_positive(int lit) { return lit > 0; }

// Sort key giving the canonical literal order: ascending by variable,
// negative before positive within a variable.
inline uint64_t lit_key(int lit) {
  return (static_cast<uint64_t>(lit_var(lit)) << 1) | (lit > 0 ? 1u : 0u);
}

// A clause is a set of literals kept in canonical order with no duplicate
// literals. A complementary pair v / -v is allowed only with the tautology
// flag set; construction sets the flag automatically.
struct Clause {
  std::vector<int> lits;
  bool tautology = false;

  Clause() = default;
  explicit Clause(std::vector<int> literals);

  int width() const { return static_cast<int>(lits.size()); }
  bool empty() const { return lits.empty(); }
  bool contains(int lit) const;
  bool has_var(int var) const;

  bool operator==(const Clause& o) const { return lits == o.lits; }
  bool operator!=(const Clause& o) const { return lits != o.lits; }

  // Byte encoding of the canonical literal sequence; used for exact
  // duplicate detection in clause pools.
  std::string encode() const;
};

// Canonical total order on clauses: lexicographic over literal sort keys,
// shorter prefix first. Used for deterministic argmax tie-breaking so that
// selections depend on clause content, not on pool position.
bool clause_less(const Clause& a, const Clause& b);

// Immutable input clauses (ids 1..n) plus an append-only derived pool
// (ids n+1..). Clause ids are 1-based throughout.
struct CnfFormula {
  int num_vars = 0;
  std::vector<Clause> input_clauses;
  std::vector<Clause> derived_clauses;

  int num_inputs() const { return static_cast<int>(input_clauses.size()); }
  int total_clauses() const {
    return num_inputs() + static_cast<int>(derived_clauses.size());
  }
  const Clause& clause(int id) const;
  int append_derived(Clause c);  // returns the new clause id

  // Throws VarOutOfRange if any literal falls outside [1, num_vars].
  void validate() const;
};

// Truth assignment; val[v] for v in [1, num_vars] is -1 (unassigned), 0, or
// 1. Partial during search, complete for certificates.
struct Assignment {
  std::vector<int8_t> val;  // index 0 unused

  Assignment() = default;
  explicit Assignment(int num_vars) : val(num_vars + 1, -1) {}

  int num_vars() const { return static_cast<int>(val.size()) - 1; }
  bool assigned(int var) const { return val[var] >= 0; }
  bool value(int var) const { return val[var] == 1; }
  void set(int var, bool v) { val[var] = v ? 1 : 0; }
  void unset(int var) { val[var] = -1; }
  bool complete() const;

  // Literal status under the current assignment.
  bool lit_true(int lit) const {
    return assigned(lit_var(lit)) && value(lit_var(lit)) == (lit > 0);
  }
  bool lit_false(int lit) const {
    return assigned(lit_var(lit)) && value(lit_var(lit)) != (lit > 0);
  }
};

// One binary resolution: the resolvent merges parent_a minus {pivot} with
// parent_b minus {-pivot}, where pivot occurs positively in parent_a and
// negatively in parent_b. id is the resolvent's clause id.
struct ResolutionStep {
  int id = 0;
  int parent_a = 0;
  int parent_b = 0;
  int pivot = 0;
  Clause resolvent;
};

// Derivation with strictly increasing ids; complete iff the last resolvent
// is empty.
struct ResolutionProof {
  std::vector<ResolutionStep> steps;
  int length() const { return static_cast<int>(steps.size()); }
};

// Machine-checkable validity report. failed_step is the offending clause id
// for proofs / clause id for assignments, 0 when valid.
struct CheckReport {
  bool valid = true;
  int failed_step = 0;
  std::string reason;
  std::string to_json() const;
};

// The resolvent of a and b on pivot. Requires the pivot variable to occur
// with opposite parity across a and b (either orientation); throws
// PivotAbsent otherwise. Symmetric in its clause arguments.
Clause resolve(const Clause& a, const Clause& b, int pivot);

// Builds the step for resolving pool clauses c1 and c2 on pivot, parents
// oriented so parent_a holds the positive pivot; id is left unset for the
// caller to fill once the resolvent joins the pool.
ResolutionStep oriented_step(const CnfFormula& f, int c1, int c2, int pivot);

// Variables occurring with opposite parity across a and b, ascending.
std::vector<int> resolvable_pivots(const Clause& a, const Clause& b);

// Replays the proof against a clause pool built incrementally from
// f.input_clauses. Valid iff every step has in-range earlier parents, the
// pivot occurs positively in parent_a and negatively in parent_b, the stated
// resolvent matches the recomputed one exactly, ids are consecutive from
// num_inputs+1, and the final resolvent is empty. An empty proof is valid
// only when some input clause is already empty.
CheckReport check_proof(const CnfFormula& f, const ResolutionProof& p);

// True iff every input clause has at least one literal made true by `a`.
// Derived clauses are ignored. Unassigned variables never satisfy a clause.
CheckReport check_assignment(const CnfFormula& f, const Assignment& a);

// Restricts a complete derivation to the ancestors of its final empty
// clause, preserving step order and renumbering ids consecutively.
// Throws NoEmptyClause if the last resolvent is nonempty. Idempotent.
ResolutionProof prune_proof_dag(const CnfFormula& f, const ResolutionProof& raw);

}  // namespace resolv
