#pragma once

#include "resolv/graph.hpp"
#include "resolv/nn.hpp"

namespace resolv {

// How embeddings absorb newly derived clauses: kStatic exchanges one local
// message pair between the new clause node and its member literals, leaving
// every other row untouched; kDynamic runs one full two-phase round over the
// mature graph, letting all rows react.
enum class EmbedMode { kStatic, kDynamic };

// Tape-resident embeddings plus the recurrent cell states behind them.
// lit_h doubles as E_L (one row per literal polarity) and cls_h as E_C (one
// row per clause, input and derived alike).
struct EmbeddingState {
  Var lit_h = -1, lit_c = -1;  // 2m x d
  Var cls_h = -1, cls_c = -1;  // clauses x d
  int rounds = 0;
};

// Registers all embedder parameters under "embedder/": a learned initial
// vector per node type, a message MLP per node type, and one recurrent cell
// per node type whose weights are shared across nodes.
void embedder_define(ParameterStore& s, int d, Rng& rng);

// Embedding width of a store populated by embedder_define.
int embedder_dim(const ParameterStore& s);

// Fresh state over the graph's current clauses: literal rows start from the
// learned literal vector, clause rows from the learned clause vector, cell
// states at zero. The graph needs at least one variable and one clause.
EmbeddingState init_state(Tape& t, const ParameterStore& s,
                          const FormulaGraph& g);

// Applies `count` two-phase rounds: clauses update from the sum of their
// member literals' messages, then literals update from the sum of their
// containing clauses' messages concatenated with the complement literal's
// previous state. Pass a trace to record which nodes exchanged messages.
EmbeddingState message_rounds(Tape& t, const ParameterStore& s,
                              const FormulaGraph& g, EmbeddingState state,
                              int count, MessageTrace* trace = nullptr);

// init_state followed by rounds >= 1 message rounds (Error otherwise).
EmbeddingState embed_formula(Tape& t, const ParameterStore& s,
                             const FormulaGraph& g, int rounds,
                             MessageTrace* trace = nullptr);

// Extends the state to the clauses appended to the graph since it was last
// updated, each starting from the learned clause vector, then lets the new
// nodes communicate per the mode. Static integration handles the new clauses
// one at a time in append order; dynamic integration appends them all and
// runs its single full round once, so a batch costs the same as one clause.
EmbeddingState integrate_derived(Tape& t, const ParameterStore& s,
                                 const FormulaGraph& g, EmbeddingState state,
                                 EmbedMode mode, MessageTrace* trace = nullptr);

}  // namespace resolv
