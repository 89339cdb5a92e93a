#pragma once

#include <string>
#include <vector>

#include "resolv/cnf.hpp"
#include "resolv/embed.hpp"
#include "resolv/nn.hpp"

namespace resolv {

// Clause-pair selection head. All variants score pairs of clause embeddings
// and pick the best valid cell; they differ in how the score grid is built.
enum class Variant { kCascaded, kFull, kAnchored };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);  // throws Error on unknown

// One selected resolution step. Clause ids are 1-based into the pool that
// was scored. anchor is the anchor variable for the anchored variant, 0
// otherwise; for valid pairs the pivot is their unique resolvable variable.
struct PairChoice {
  int c1 = 0;
  int c2 = 0;
  int pivot = 0;
  double score = 0.0;
  int anchor = 0;
};

// Validity mask over ordered clause-id pairs. Cell (i, j), 0-based, is valid
// iff i != j, the two clauses resolve on their lowest shared pivot to a
// non-tautological clause, and that resolvent is not already in the pool.
// The mask is symmetric because resolution is order-insensitive.
struct PairMask {
  Matrix valid;                         // total x total, 1 valid / 0 masked
  std::vector<std::vector<int>> pivot;  // lowest resolvable pivot, 0 if none
  bool any_valid = false;
};

PairMask valid_pair_mask(const CnfFormula& f);

// The final score table a selection was taken from, for inspection: raw
// scores, the valid-cell mask aligned with them, and the 1-based clause ids
// labelling each row and column.
struct ScoreGrid {
  Matrix scores;
  Matrix valid;
  std::vector<int> row_ids;
  std::vector<int> col_ids;
};

// Teacher-forced step target: the certificate's parent clause ids.
struct TeacherTarget {
  int c1 = 0;
  int c2 = 0;
};

// Selection result. choice is the model's own greedy pick. log_prob is the
// tape-resident log-likelihood of the target pair when one is given (the
// greedy pick otherwise), factored per variant: joint cell probability for
// the full grid, p(c1) * p(c2 | c1) for cascaded, p(anchor) * p(cell |
// anchor) for anchored. argmax_match reports whether the greedy pick equals
// the target as an unordered pair.
struct SelectorOutput {
  PairChoice choice;
  Var log_prob = -1;
  bool argmax_match = false;
  ScoreGrid grid;
};

// Registers selection-head parameters under "selector/". The full grid uses
// "W_Q"/"W_K" (d x d each); cascaded uses "W1" (2d x d), "W2" (d x d) and
// "u" (1 x d) shared by both query stages; anchored uses its own anchor
// triple "anchor_W1"/"anchor_W2"/"anchor_u" plus a private "W_Q"/"W_K" grid.
void selector_define(ParameterStore& s, Variant variant, int d, Rng& rng);

// Scores every valid pair of the pool under the given embeddings and picks
// the best cell, breaking score ties by canonical clause content and then by
// id so the choice is invariant under clause reordering. Throws NoValidPair
// when the mask admits nothing and TeacherStepInvalid when a given target
// does not denote a valid pair of pool clauses.
SelectorOutput select_pair(Tape& t, const ParameterStore& s, Variant variant,
                           const CnfFormula& f, const EmbeddingState& st,
                           const PairMask& mask,
                           const TeacherTarget* target = nullptr);

// Takes up to k resolution steps from one forward pass: the k best valid
// cells of the variant's final score table, re-validated in score order as
// earlier picks extend the pool (in-batch duplicate resolvents are skipped
// without consuming a slot). Resolvents are appended to f in emission order;
// the caller integrates them into the embedding state afterwards. Stops
// early when the empty clause is derived. Throws NoValidPair when the
// current pool admits no step.
std::vector<PairChoice> top_k_steps(Tape& t, const ParameterStore& s,
                                    Variant variant, CnfFormula& f,
                                    const EmbeddingState& st, int k);

// ---- assignment decoding ------------------------------------------------

// Which literal polarity's embeddings to read a truth assignment from.
enum class Branch { kPositive, kNegative };

// Registers the decoder MLP under "decoder/": bias-free d -> d -> 1 with a
// sigmoid hidden layer. Its raw output is the truth logit of a literal.
void decoder_define(ParameterStore& s, int d, Rng& rng);

// Truth logits for all 2V literal rows (row order matches the graph's
// literal rows) and for the positive-literal rows only (row v-1 is variable
// v). The positive form is what training supervises.
Var decode_literal_logits(Tape& t, const ParameterStore& s,
                          const EmbeddingState& st);
Var decode_positive_logits(Tape& t, const ParameterStore& s,
                           const EmbeddingState& st);

// Reads a complete assignment off one polarity branch: a literal is true
// when its sigmoid-activated logit exceeds 0.5 (ties fall to false), and a
// negative-branch literal value is negated to give the variable's value.
Assignment decode_assignment(Tape& t, const ParameterStore& s,
                             const EmbeddingState& st, Branch branch);

// ---- satisfiability classification --------------------------------------

// Registers the classifier MLP under "classifier/": bias-free
// d -> d -> d -> 1 with tanh hidden layers, applied per positive literal.
void classifier_define(ParameterStore& s, int d, Rng& rng);

// Mean of the per-variable classifier votes, as a 1x1 tape node. The
// sigmoid of this logit is the predicted probability that the formula is
// satisfiable.
Var classify_logit(Tape& t, const ParameterStore& s, const EmbeddingState& st);
double classify_satisfiability(Tape& t, const ParameterStore& s,
                               const EmbeddingState& st);

}  // namespace resolv
