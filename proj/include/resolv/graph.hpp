#pragma once

#include <vector>

#include "resolv/cnf.hpp"

namespace resolv {

// Bipartite formula graph: one node per literal polarity (2 per variable)
// plus one node per clause, with clause-literal membership edges. Each
// literal is implicitly paired with its complement. The graph is append-only:
// derived clauses add nodes but never remove or reorder existing ones.
//
// Node layout is deterministic: literal rows come first, ordered by
// (variable, polarity), then clause nodes in clause id order.
struct FormulaGraph {
  int num_vars = 0;
  std::vector<std::vector<int>> clause_lits;  // clause index -> literal rows
  std::vector<std::vector<int>> lit_clauses;  // literal row -> clause indices

  // Row of a literal in the embedding matrix: positive polarity on even
  // rows, negative on odd, so complements differ in the lowest bit.
  static int lit_row(int lit) {
    return 2 * (lit_var(lit) - 1) + (lit_positive(lit) ? 0 : 1);
  }
  static int comp_row(int row) { return row ^ 1; }

  int num_lits() const { return 2 * num_vars; }
  int num_clauses() const { return static_cast<int>(clause_lits.size()); }

  // Global node ids for instrumentation: literals first, then clauses.
  int lit_node(int row) const { return row; }
  int clause_node(int index) const { return num_lits() + index; }
  int num_nodes() const { return num_lits() + num_clauses(); }

  int membership_edges() const;

  // Appends one clause node with edges to its literal rows. The clause must
  // respect num_vars, which is fixed at construction.
  void append_clause(const Clause& c);
};

// Graph over all clauses currently in the formula (input and derived), with
// clause index id-1 for clause id.
FormulaGraph build_graph(const CnfFormula& f);

// Records which nodes have exchanged messages, as an equivalence closure:
// two nodes relate when information from one can have reached the other
// through any chain of recorded exchanges.
class MessageTrace {
 public:
  void unite(int a, int b);
  bool related(int a, int b) const;

 private:
  int find(int a) const;
  mutable std::vector<int> parent_;
};

// The have-exchanged-messages relation restricted to clause nodes, indexed
// by clause index on both axes.
std::vector<std::vector<bool>> message_reachability(const FormulaGraph& g,
                                                    const MessageTrace& trace);

}  // namespace resolv
