#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "oracles.hpp"
#include "resolv/graph.hpp"
#include "resolv/rng.hpp"

using namespace resolv;

TEST_CASE("literal rows pair complements on adjacent indices") {
  CHECK(FormulaGraph::lit_row(1) == 0);
  CHECK(FormulaGraph::lit_row(-1) == 1);
  CHECK(FormulaGraph::lit_row(2) == 2);
  CHECK(FormulaGraph::lit_row(-2) == 3);
  CHECK(FormulaGraph::lit_row(7) == 12);
  for (int lit : {1, -1, 2, -2, 9, -9}) {
    int row = FormulaGraph::lit_row(lit);
    CHECK(FormulaGraph::comp_row(row) == FormulaGraph::lit_row(-lit));
    CHECK(FormulaGraph::comp_row(FormulaGraph::comp_row(row)) == row);
  }
}

TEST_CASE("three-clause example has the expected nodes and edges") {
  CnfFormula f = oracle::F(2, {{1, 2}, {1, -2}, {-1, -2}});
  FormulaGraph g = build_graph(f);
  CHECK(g.num_lits() == 4);
  CHECK(g.num_clauses() == 3);
  CHECK(g.membership_edges() == 6);
  CHECK(g.num_vars == 2);  // one complement pairing per variable
  CHECK(g.clause_lits[0] == std::vector<int>{0, 2});
  CHECK(g.clause_lits[1] == std::vector<int>{0, 3});
  CHECK(g.clause_lits[2] == std::vector<int>{1, 3});
  CHECK(g.lit_clauses[0] == std::vector<int>{0, 1});
  CHECK(g.lit_clauses[1] == std::vector<int>{2});
  CHECK(g.lit_clauses[2] == std::vector<int>{0});
  CHECK(g.lit_clauses[3] == std::vector<int>{1, 2});
  CHECK(g.num_nodes() == 7);
  CHECK(g.clause_node(0) == 4);
}

TEST_CASE("single unit clause graph") {
  CnfFormula f = oracle::F(1, {{1}});
  FormulaGraph g = build_graph(f);
  CHECK(g.num_lits() == 2);
  CHECK(g.num_clauses() == 1);
  CHECK(g.membership_edges() == 1);
  CHECK(g.num_vars == 1);
}

TEST_CASE("degree sums satisfy the handshake identity") {
  Rng rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    int n = rng.uniform_int(1, 9);
    int m = rng.uniform_int(1, 12);
    CnfFormula f = oracle::random_formula(n, m, rng);
    FormulaGraph g = build_graph(f);
    int width_total = 0;
    for (int id = 1; id <= f.total_clauses(); ++id)
      width_total += f.clause(id).width();
    CHECK(g.membership_edges() == width_total);
    int lit_degree = 0;
    for (const auto& cs : g.lit_clauses)
      lit_degree += static_cast<int>(cs.size());
    CHECK(lit_degree == width_total);
  }
}

TEST_CASE("derived clauses appear as appended nodes") {
  CnfFormula f = oracle::F(3, {{1, 2}, {-1, 3}});
  f.append_derived(resolve(f.clause(1), f.clause(2), 1));
  FormulaGraph g = build_graph(f);
  CHECK(g.num_clauses() == 3);
  CHECK(g.clause_lits[2] == std::vector<int>{2, 4});  // {2, 3}

  FormulaGraph inc = build_graph(oracle::F(3, {{1, 2}, {-1, 3}}));
  inc.append_clause(f.clause(3));
  CHECK(inc.clause_lits == g.clause_lits);
  CHECK(inc.lit_clauses == g.lit_clauses);

  CHECK_THROWS_AS(inc.append_clause(oracle::C({4})), VarOutOfRange);
}

TEST_CASE("message trace closes exchanges transitively") {
  MessageTrace tr;
  CHECK(tr.related(0, 0));       // reflexive even before any exchange
  CHECK_FALSE(tr.related(0, 1));
  tr.unite(0, 1);
  tr.unite(2, 3);
  CHECK(tr.related(1, 0));
  CHECK(tr.related(2, 3));
  CHECK_FALSE(tr.related(0, 3));
  tr.unite(1, 2);
  CHECK(tr.related(0, 3));       // chained through 1-2
  CHECK_FALSE(tr.related(0, 9)); // untouched node
}

TEST_CASE("reachability restricts the trace to clause nodes") {
  CnfFormula f = oracle::F(2, {{1}, {-1}, {2}});
  FormulaGraph g = build_graph(f);
  MessageTrace tr;
  tr.unite(g.clause_node(0), g.lit_node(0));
  tr.unite(g.clause_node(1), g.lit_node(1));
  tr.unite(g.lit_node(0), g.lit_node(1));  // complement exchange
  auto rel = message_reachability(g, tr);
  CHECK(rel[0][1]);
  CHECK(rel[1][0]);
  CHECK(rel[2][2]);
  CHECK_FALSE(rel[0][2]);
  CHECK_FALSE(rel[2][1]);
}
