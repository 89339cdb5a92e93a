#include "resolv/teacher.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

namespace resolv {

namespace {

constexpr int kSat = 0;

class Dpll {
 public:
  Dpll(const CnfFormula& f, bool log, const SolverLimits& lim)
      : f_(f), log_(log), lim_(lim), n_(f.num_vars), assign_(f.num_vars) {
    int m = f_.num_inputs();
    occur_pos_.resize(n_ + 1);
    occur_neg_.resize(n_ + 1);
    n_true_.assign(m, 0);
    n_unassigned_.assign(m, 0);
    antecedent_.assign(n_ + 1, 0);
    trail_pos_.assign(n_ + 1, -1);
    for (int c = 0; c < m; ++c) {
      const Clause& cl = f_.input_clauses[c];
      n_unassigned_[c] = cl.width();
      for (int l : cl.lits)
        (l > 0 ? occur_pos_[l] : occur_neg_[-l]).push_back(c + 1);
    }
    if (log_) {
      pool_.reserve(m);
      for (const Clause& cl : f_.input_clauses) {
        pool_.push_back(cl);
        canon_.emplace(cl.encode(), static_cast<int>(pool_.size()));
      }
    }
  }

  SolveResult run() {
    auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    res.sat = search_root();
    if (res.sat) {
      res.assignment = assign_;
    } else if (log_ && !raw_proof_.steps.empty()) {
      // An empty raw proof means an input clause was already empty; the
      // certificate is the (valid) empty derivation.
      res.proof = prune_proof_dag(f_, raw_proof_);
    }
    res.stats = stats_;
    res.stats.wall_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - t0)
            .count();
    return res;
  }

 private:
  // --- assignment bookkeeping -------------------------------------------

  void set_var(int var, bool value, int antecedent) {
    assign_.set(var, value);
    antecedent_[var] = antecedent;
    trail_pos_[var] = static_cast<int>(trail_.size());
    trail_.push_back(var);
    for (int c : (value ? occur_pos_[var] : occur_neg_[var]))
      if (n_true_[c - 1]++ == 0) ++satisfied_;
    for (int c : (value ? occur_neg_[var] : occur_pos_[var]))
      --n_unassigned_[c - 1];
  }

  void undo_to(size_t mark) {
    while (trail_.size() > mark) {
      int var = trail_.back();
      trail_.pop_back();
      bool value = assign_.value(var);
      for (int c : (value ? occur_pos_[var] : occur_neg_[var]))
        if (--n_true_[c - 1] == 0) --satisfied_;
      for (int c : (value ? occur_neg_[var] : occur_pos_[var]))
        ++n_unassigned_[c - 1];
      assign_.unset(var);
      antecedent_[var] = 0;
      trail_pos_[var] = -1;
    }
    qhead_ = std::min(qhead_, trail_.size());
  }

  // Unit propagation to fixpoint. Returns a falsified input clause id, or 0.
  int propagate() {
    while (qhead_ < trail_.size()) {
      int var = trail_[qhead_++];
      const auto& watch =
          assign_.value(var) ? occur_neg_[var] : occur_pos_[var];
      for (int c : watch) {
        if (n_true_[c - 1] > 0) continue;
        if (n_unassigned_[c - 1] == 0) return c;
        if (n_unassigned_[c - 1] == 1) {
          int unit = find_unassigned(f_.input_clauses[c - 1]);
          ++stats_.propagations;
          set_var(lit_var(unit), unit > 0, c);
        }
      }
    }
    return 0;
  }

  int find_unassigned(const Clause& cl) const {
    for (int l : cl.lits)
      if (!assign_.assigned(lit_var(l))) return l;
    throw Error("internal: unit clause without unassigned literal");
  }

  // --- proof recording ---------------------------------------------------

  // Resolves pool clauses a and b on pivot, orienting so the pivot is
  // positive in parent_a. Reuses the id of a syntactically equal existing
  // clause instead of recording a duplicate step.
  int record_resolve(int a, int b, int pivot) {
    if (!pool_[a - 1].contains(pivot)) std::swap(a, b);
    Clause r = resolve(pool_[a - 1], pool_[b - 1], pivot);
    std::string key = r.encode();
    auto it = canon_.find(key);
    if (it != canon_.end()) return it->second;
    pool_.push_back(r);
    int id = static_cast<int>(pool_.size());
    canon_.emplace(std::move(key), id);
    raw_proof_.steps.push_back({id, a, b, pivot, std::move(r)});
    return id;
  }

  // Regresses a falsified clause to decision literals only by resolving out
  // propagated variables, most recently assigned first.
  int regress(int clause_id) {
    int cur = clause_id;
    for (;;) {
      int pivot = 0, best_pos = -1;
      for (int l : pool_[cur - 1].lits) {
        int v = lit_var(l);
        if (antecedent_[v] != 0 && trail_pos_[v] > best_pos) {
          best_pos = trail_pos_[v];
          pivot = v;
        }
      }
      if (pivot == 0) return cur;
      cur = record_resolve(cur, antecedent_[pivot], pivot);
    }
  }

  // --- search ------------------------------------------------------------

  bool all_satisfied() const { return satisfied_ == f_.num_inputs(); }

  void complete_with_false() {
    for (int v = 1; v <= n_; ++v)
      if (!assign_.assigned(v)) set_var(v, false, 0);
  }

  // Assigns pure literals (occurring with a single polarity among
  // unsatisfied clauses) until fixpoint. Never creates units or conflicts.
  void eliminate_pure_literals() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (int v = 1; v <= n_; ++v) {
        if (assign_.assigned(v)) continue;
        bool pos = has_unsatisfied_occurrence(occur_pos_[v]);
        bool neg = has_unsatisfied_occurrence(occur_neg_[v]);
        if (pos == neg) continue;
        set_var(v, pos, 0);
        changed = true;
      }
    }
  }

  bool has_unsatisfied_occurrence(const std::vector<int>& occ) const {
    for (int c : occ)
      if (n_true_[c - 1] == 0) return true;
    return false;
  }

  // Root-level driver: initial units, then the recursive search. On UNSAT
  // the final conflict clause regresses to the empty clause.
  bool search_root() {
    for (int c = 1; c <= f_.num_inputs(); ++c) {
      const Clause& cl = f_.input_clauses[c - 1];
      if (cl.empty()) return false;  // falsum input: empty certificate
      if (cl.width() == 1) {
        int unit = cl.lits[0];
        if (assign_.lit_false(unit)) {
          if (log_) regress(c);
          return false;
        }
        if (!assign_.assigned(lit_var(unit))) {
          ++stats_.propagations;
          set_var(lit_var(unit), unit > 0, c);
        }
      }
    }
    int conflict = propagate();
    if (conflict != 0) {
      if (log_) regress(conflict);
      return false;
    }
    int r = search();
    return r == kSat;
  }

  // Returns kSat, or (when logging) the pool id of a decisions-only conflict
  // clause falsified under the caller's assignment; without logging the
  // conflict id is meaningless and only the UNSAT outcome matters.
  int search() {
    if (!log_) eliminate_pure_literals();
    if (all_satisfied()) {
      complete_with_false();
      return kSat;
    }
    int x = 1;
    while (x <= n_ && assign_.assigned(x)) ++x;
    if (x > n_)
      throw Error("internal: full assignment with unsatisfied clause");

    int branch_conflict[2] = {0, 0};  // [0] = true branch, [1] = false branch
    for (int phase = 0; phase < 2; ++phase) {
      ++stats_.decisions;
      if (lim_.max_decisions > 0 && stats_.decisions > lim_.max_decisions)
        throw ResourceLimitExceeded("decision budget exhausted (" +
                                    std::to_string(lim_.max_decisions) + ")");
      bool value = (phase == 0);
      size_t mark = trail_.size();
      set_var(x, value, 0);
      int conflict = propagate();
      int sub;
      if (conflict == 0) {
        sub = search();
        if (sub == kSat) return kSat;
      } else {
        sub = log_ ? regress(conflict) : -1;
      }
      undo_to(mark);
      if (log_) {
        // A conflict clause not mentioning this branch's decision literal is
        // falsified under the parent assignment already; return it directly.
        int blame = value ? -x : x;
        if (!pool_[sub - 1].contains(blame)) return sub;
        branch_conflict[phase] = sub;
      }
    }
    if (!log_) return -1;
    // Both branches refuted and both clauses mention x: resolve them on x.
    return record_resolve(branch_conflict[1], branch_conflict[0], x);
  }

  const CnfFormula& f_;
  bool log_;
  SolverLimits lim_;
  SolverStats stats_;
  int n_;
  Assignment assign_;
  std::vector<int> trail_;
  size_t qhead_ = 0;
  std::vector<int> antecedent_;  // per var: input clause id, 0 = decision
  std::vector<int> trail_pos_;
  std::vector<std::vector<int>> occur_pos_, occur_neg_;  // input clause ids
  std::vector<int> n_true_, n_unassigned_;
  int satisfied_ = 0;

  std::vector<Clause> pool_;  // inputs + derived, when logging
  std::unordered_map<std::string, int> canon_;
  ResolutionProof raw_proof_;
};

}  // namespace

SolveResult solve(const CnfFormula& f, bool log_proof,
                  const SolverLimits& lim) {
  f.validate();
  Dpll solver(f, log_proof, lim);
  return solver.run();
}

}  // namespace resolv
