#include "resolv/embed.hpp"

#include <cmath>

namespace resolv {

namespace {

constexpr const char* kLitInit = "embedder/lit_init";
constexpr const char* kClsInit = "embedder/cls_init";
constexpr const char* kLitMsg = "embedder/lit_msg";
constexpr const char* kClsMsg = "embedder/cls_msg";
constexpr const char* kLitLstm = "embedder/lit_lstm";
constexpr const char* kClsLstm = "embedder/cls_lstm";

// Dense clause-by-literal membership matrix; multiplying by it sums member
// messages per clause, and by its transpose sums clause messages per literal.
Matrix incidence(const FormulaGraph& g) {
  Matrix a = Matrix::Zero(g.num_clauses(), g.num_lits());
  for (int c = 0; c < g.num_clauses(); ++c)
    for (int row : g.clause_lits[c]) a(c, row) = 1.0;
  return a;
}

std::vector<int> complement_index(const FormulaGraph& g) {
  std::vector<int> idx(g.num_lits());
  for (int row = 0; row < g.num_lits(); ++row)
    idx[row] = FormulaGraph::comp_row(row);
  return idx;
}

void trace_full_round(const FormulaGraph& g, MessageTrace* trace) {
  if (!trace) return;
  for (int c = 0; c < g.num_clauses(); ++c)
    for (int row : g.clause_lits[c])
      trace->unite(g.clause_node(c), g.lit_node(row));
  for (int row = 0; row < g.num_lits(); row += 2)
    trace->unite(g.lit_node(row), g.lit_node(row + 1));
}

// One two-phase round given the current membership matrix.
EmbeddingState full_round(Tape& t, const ParameterStore& s,
                          const FormulaGraph& g, Var membership,
                          EmbeddingState st, MessageTrace* trace) {
  Var lit_msgs = mlp_forward(t, s, kLitMsg, st.lit_h, Act::kTanh);
  Var cls_in = matmul(t, membership, lit_msgs);
  LstmState cls = lstm_cell_step(t, s, kClsLstm, cls_in,
                                 LstmState{st.cls_h, st.cls_c});

  Var cls_msgs = mlp_forward(t, s, kClsMsg, cls.h, Act::kTanh);
  Var lit_in = matmul_tn(t, membership, cls_msgs);
  Var comp = gather_rows(t, st.lit_h, complement_index(g));
  LstmState lit = lstm_cell_step(t, s, kLitLstm, concat_cols(t, lit_in, comp),
                                 LstmState{st.lit_h, st.lit_c});

  trace_full_round(g, trace);
  return EmbeddingState{lit.h, lit.c, cls.h, cls.c, st.rounds + 1};
}

// Replaces the rows at idx with the rows of `rows`, other rows unchanged.
Var write_rows(Tape& t, Var base, const std::vector<int>& idx, Var rows) {
  Matrix keep = Matrix::Ones(t.rows(base), t.cols(base));
  for (int i : idx) keep.row(i).setZero();
  return add(t, cmul(t, base, t.constant(keep)),
             scatter_rows(t, rows, idx, t.rows(base)));
}

}  // namespace

void embedder_define(ParameterStore& s, int d, Rng& rng) {
  double scale = 1.0 / std::sqrt(static_cast<double>(d));
  s.define(kLitInit, 1, d, rng, scale);
  s.define(kClsInit, 1, d, rng, scale);
  mlp_define(s, kLitMsg, {d, d, d, d}, true, rng);
  mlp_define(s, kClsMsg, {d, d, d, d}, true, rng);
  lstm_define(s, kLitLstm, 2 * d, d, rng);
  lstm_define(s, kClsLstm, d, d, rng);
}

int embedder_dim(const ParameterStore& s) {
  return static_cast<int>(s.value(kLitInit).cols());
}

EmbeddingState init_state(Tape& t, const ParameterStore& s,
                          const FormulaGraph& g) {
  if (g.num_vars < 1 || g.num_clauses() < 1)
    throw Error("init_state wants at least one variable and one clause");
  int d = embedder_dim(s);
  EmbeddingState st;
  st.lit_h = tile_rows(t, param(t, s, kLitInit), g.num_lits());
  st.lit_c = t.constant(Matrix::Zero(g.num_lits(), d));
  st.cls_h = tile_rows(t, param(t, s, kClsInit), g.num_clauses());
  st.cls_c = t.constant(Matrix::Zero(g.num_clauses(), d));
  return st;
}

EmbeddingState message_rounds(Tape& t, const ParameterStore& s,
                              const FormulaGraph& g, EmbeddingState state,
                              int count, MessageTrace* trace) {
  if (count <= 0) return state;
  Var membership = t.constant(incidence(g));
  for (int r = 0; r < count; ++r)
    state = full_round(t, s, g, membership, state, trace);
  return state;
}

EmbeddingState embed_formula(Tape& t, const ParameterStore& s,
                             const FormulaGraph& g, int rounds,
                             MessageTrace* trace) {
  if (rounds < 1) throw Error("embed_formula wants rounds >= 1");
  return message_rounds(t, s, g, init_state(t, s, g), rounds, trace);
}

EmbeddingState integrate_derived(Tape& t, const ParameterStore& s,
                                 const FormulaGraph& g, EmbeddingState state,
                                 EmbedMode mode, MessageTrace* trace) {
  int have = t.rows(state.cls_h);
  int total = g.num_clauses();
  if (have > total)
    throw ShapeMismatch("embedding state covers more clauses than the graph");
  if (have == total) return state;
  int d = embedder_dim(s);

  if (mode == EmbedMode::kDynamic) {
    Var fresh = total - have > 1
                    ? tile_rows(t, param(t, s, kClsInit), total - have)
                    : param(t, s, kClsInit);
    state.cls_h = vstack(t, {state.cls_h, fresh});
    state.cls_c = vstack(t, {state.cls_c,
                             t.constant(Matrix::Zero(total - have, d))});
    Var membership = t.constant(incidence(g));
    return full_round(t, s, g, membership, state, trace);
  }

  for (int idx = have; idx < total; ++idx) {
    const std::vector<int>& members = g.clause_lits[idx];

    // The new clause node absorbs its member literals' messages first.
    Var cls_in;
    if (members.empty()) {
      cls_in = t.constant(Matrix::Zero(1, d));
    } else {
      Var msgs = mlp_forward(t, s, kLitMsg,
                             gather_rows(t, state.lit_h, members), Act::kTanh);
      cls_in = matmul(
          t, t.constant(Matrix::Ones(1, static_cast<int>(members.size()))),
          msgs);
    }
    LstmState node = lstm_cell_step(
        t, s, kClsLstm, cls_in,
        LstmState{param(t, s, kClsInit), t.constant(Matrix::Zero(1, d))});
    state.cls_h = vstack(t, {state.cls_h, node.h});
    state.cls_c = vstack(t, {state.cls_c, node.c});

    // Then replies to exactly those literals; the rest of the state is
    // carried over bit for bit. Each updated literal still reads its
    // complement, as in a full round.
    if (!members.empty()) {
      int k = static_cast<int>(members.size());
      std::vector<int> comp(k);
      for (int i = 0; i < k; ++i)
        comp[i] = FormulaGraph::comp_row(members[i]);
      Var msg = tile_rows(t, mlp_forward(t, s, kClsMsg, node.h, Act::kTanh),
                          k);
      Var lit_in = concat_cols(t, msg, gather_rows(t, state.lit_h, comp));
      LstmState lit = lstm_cell_step(
          t, s, kLitLstm, lit_in,
          LstmState{gather_rows(t, state.lit_h, members),
                    gather_rows(t, state.lit_c, members)});
      state.lit_h = write_rows(t, state.lit_h, members, lit.h);
      state.lit_c = write_rows(t, state.lit_c, members, lit.c);
    }

    if (trace) {
      for (int row : members) {
        trace->unite(g.clause_node(idx), g.lit_node(row));
        trace->unite(g.lit_node(row),
                     g.lit_node(FormulaGraph::comp_row(row)));
      }
    }
  }
  return state;
}

}  // namespace resolv
