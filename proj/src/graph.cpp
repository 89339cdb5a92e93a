#include "resolv/graph.hpp"

#include <numeric>

namespace resolv {

int FormulaGraph::membership_edges() const {
  int total = 0;
  for (const auto& lits : clause_lits)
    total += static_cast<int>(lits.size());
  return total;
}

void FormulaGraph::append_clause(const Clause& c) {
  std::vector<int> rows;
  rows.reserve(c.lits.size());
  for (int lit : c.lits) {
    int row = lit_row(lit);
    if (row >= num_lits())
      throw VarOutOfRange("clause variable exceeds graph variable count");
    rows.push_back(row);
    lit_clauses[row].push_back(num_clauses());
  }
  clause_lits.push_back(std::move(rows));
}

FormulaGraph build_graph(const CnfFormula& f) {
  FormulaGraph g;
  g.num_vars = f.num_vars;
  g.lit_clauses.resize(g.num_lits());
  for (int id = 1; id <= f.total_clauses(); ++id)
    g.append_clause(f.clause(id));
  return g;
}

void MessageTrace::unite(int a, int b) {
  int need = std::max(a, b) + 1;
  if (static_cast<int>(parent_.size()) < need) {
    int old = static_cast<int>(parent_.size());
    parent_.resize(need);
    std::iota(parent_.begin() + old, parent_.end(), old);
  }
  parent_[find(a)] = find(b);
}

bool MessageTrace::related(int a, int b) const {
  if (a == b) return true;
  int n = static_cast<int>(parent_.size());
  if (a >= n || b >= n) return false;  // untouched nodes relate to nothing
  return find(a) == find(b);
}

int MessageTrace::find(int a) const {
  while (parent_[a] != a) {
    parent_[a] = parent_[parent_[a]];
    a = parent_[a];
  }
  return a;
}

std::vector<std::vector<bool>> message_reachability(const FormulaGraph& g,
                                                    const MessageTrace& trace) {
  int n = g.num_clauses();
  std::vector<std::vector<bool>> rel(n, std::vector<bool>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      rel[i][j] = trace.related(g.clause_node(i), g.clause_node(j));
  return rel;
}

}  // namespace resolv
