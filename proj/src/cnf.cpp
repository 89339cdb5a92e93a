#include "resolv/cnf.hpp"

#include <algorithm>
#include <unordered_set>

namespace resolv {

Clause::Clause(std::vector<int> literals) : lits(std::move(literals)) {
  std::sort(lits.begin(), lits.end(),
            [](int a, int b) { return lit_key(a) < lit_key(b); });
  lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
  for (size_t i = 1; i < lits.size(); ++i) {
    if (lit_var(lits[i]) == lit_var(lits[i - 1])) {
      tautology = true;
      break;
    }
  }
}

bool Clause::contains(int lit) const {
  return std::binary_search(lits.begin(), lits.end(), lit, [](int a, int b) {
    return lit_key(a) < lit_key(b);
  });
}

bool Clause::has_var(int var) const {
  return contains(var) || contains(-var);
}

std::string Clause::encode() const {
  std::string out;
  out.reserve(lits.size() * sizeof(int));
  for (int l : lits) out.append(reinterpret_cast<const char*>(&l), sizeof(int));
  return out;
}

bool clause_less(const Clause& a, const Clause& b) {
  return std::lexicographical_compare(
      a.lits.begin(), a.lits.end(), b.lits.begin(), b.lits.end(),
      [](int x, int y) { return lit_key(x) < lit_key(y); });
}

const Clause& CnfFormula::clause(int id) const {
  int n = num_inputs();
  if (id >= 1 && id <= n) return input_clauses[id - 1];
  return derived_clauses.at(id - n - 1);
}

int CnfFormula::append_derived(Clause c) {
  derived_clauses.push_back(std::move(c));
  return total_clauses();
}

void CnfFormula::validate() const {
  for (const Clause& c : input_clauses)
    for (int l : c.lits)
      if (lit_var(l) < 1 || lit_var(l) > num_vars)
        throw VarOutOfRange("literal " + std::to_string(l) +
                            " outside [1, " + std::to_string(num_vars) + "]");
}

bool Assignment::complete() const {
  for (size_t v = 1; v < val.size(); ++v)
    if (val[v] < 0) return false;
  return true;
}

Clause resolve(const Clause& a, const Clause& b, int pivot) {
  bool pos_in_a = a.contains(pivot) && b.contains(-pivot);
  bool neg_in_a = a.contains(-pivot) && b.contains(pivot);
  if (pivot < 1 || (!pos_in_a && !neg_in_a))
    throw PivotAbsent("pivot " + std::to_string(pivot) +
                      " does not occur with opposite parity");
  // Only the resolved-upon literal leaves each parent; a parent that also
  // carries the opposite polarity of the pivot keeps it, so resolving on a
  // tautological parent stays sound. When both orientations apply, both
  // parents are tautological on the pivot and the two readings agree.
  int drop_a = pos_in_a ? pivot : -pivot;
  int drop_b = -drop_a;
  std::vector<int> merged;
  merged.reserve(a.lits.size() + b.lits.size());
  for (int l : a.lits)
    if (l != drop_a) merged.push_back(l);
  for (int l : b.lits)
    if (l != drop_b) merged.push_back(l);
  return Clause(std::move(merged));
}

std::vector<int> resolvable_pivots(const Clause& a, const Clause& b) {
  std::vector<int> out;
  for (int l : a.lits)
    if (b.contains(-l)) out.push_back(lit_var(l));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ResolutionStep oriented_step(const CnfFormula& f, int c1, int c2, int pivot) {
  int pa = f.clause(c1).contains(pivot) ? c1 : c2;
  int pb = pa == c1 ? c2 : c1;
  ResolutionStep step;
  step.parent_a = pa;
  step.parent_b = pb;
  step.pivot = pivot;
  step.resolvent = resolve(f.clause(pa), f.clause(pb), pivot);
  return step;
}

namespace {

CheckReport fail_step(int id, std::string reason) {
  return CheckReport{false, id, std::move(reason)};
}

}  // namespace

CheckReport check_proof(const CnfFormula& f, const ResolutionProof& p) {
  int n = f.num_inputs();
  if (p.steps.empty()) {
    for (const Clause& c : f.input_clauses)
      if (c.empty()) return CheckReport{};
    return fail_step(0, "empty_proof_without_empty_input_clause");
  }
  // Pool of clauses visible to each step: inputs plus earlier resolvents.
  std::vector<const Clause*> pool;
  pool.reserve(n + p.steps.size());
  for (const Clause& c : f.input_clauses) pool.push_back(&c);
  for (size_t k = 0; k < p.steps.size(); ++k) {
    const ResolutionStep& s = p.steps[k];
    int expected_id = n + static_cast<int>(k) + 1;
    if (s.id != expected_id)
      return fail_step(s.id, "step_id_not_consecutive");
    if (s.parent_a < 1 || s.parent_a >= s.id || s.parent_b < 1 ||
        s.parent_b >= s.id)
      return fail_step(s.id, "parent_id_out_of_range");
    const Clause& pa = *pool[s.parent_a - 1];
    const Clause& pb = *pool[s.parent_b - 1];
    if (s.pivot < 1 || !pa.contains(s.pivot) || !pb.contains(-s.pivot))
      return fail_step(s.id, "pivot_not_positive_in_a_negative_in_b");
    Clause expect = resolve(pa, pb, s.pivot);
    if (expect != s.resolvent || expect.tautology != s.resolvent.tautology)
      return fail_step(s.id, "resolvent_mismatch");
    pool.push_back(&s.resolvent);
  }
  if (!p.steps.back().resolvent.empty())
    return fail_step(p.steps.back().id, "final_resolvent_not_empty");
  return CheckReport{};
}

CheckReport check_assignment(const CnfFormula& f, const Assignment& a) {
  if (a.num_vars() < f.num_vars)
    return fail_step(0, "assignment_covers_too_few_variables");
  for (int i = 0; i < f.num_inputs(); ++i) {
    const Clause& c = f.input_clauses[i];
    bool sat = false;
    for (int l : c.lits)
      if (a.lit_true(l)) {
        sat = true;
        break;
      }
    if (!sat) return fail_step(i + 1, "clause_unsatisfied");
  }
  return CheckReport{};
}

ResolutionProof prune_proof_dag(const CnfFormula& f,
                                const ResolutionProof& raw) {
  if (raw.steps.empty() || !raw.steps.back().resolvent.empty())
    throw NoEmptyClause("derivation does not end in the empty clause");
  int n = f.num_inputs();
  // Mark ancestors of the final step over derived-clause parent links.
  std::vector<char> keep(raw.steps.size(), 0);
  std::vector<int> stack = {static_cast<int>(raw.steps.size()) - 1};
  while (!stack.empty()) {
    int k = stack.back();
    stack.pop_back();
    if (keep[k]) continue;
    keep[k] = 1;
    for (int parent : {raw.steps[k].parent_a, raw.steps[k].parent_b})
      if (parent > n) stack.push_back(parent - n - 1);
  }
  // Renumber surviving steps consecutively, remapping parent references.
  std::vector<int> new_id(raw.steps.size(), 0);
  ResolutionProof out;
  for (size_t k = 0; k < raw.steps.size(); ++k) {
    if (!keep[k]) continue;
    ResolutionStep s = raw.steps[k];
    s.id = n + out.length() + 1;
    new_id[k] = s.id;
    if (s.parent_a > n) s.parent_a = new_id[s.parent_a - n - 1];
    if (s.parent_b > n) s.parent_b = new_id[s.parent_b - n - 1];
    out.steps.push_back(std::move(s));
  }
  return out;
}

std::string CheckReport::to_json() const {
  std::string out = "{\"valid\": ";
  out += valid ? "true" : "false";
  out += ", \"failed_step\": ";
  out += valid ? "null" : std::to_string(failed_step);
  out += ", \"reason\": \"" + reason + "\"}";
  return out;
}

}  // namespace resolv
