#include "resolv/policy.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace resolv {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kCascaded:
      return "cascaded";
    case Variant::kFull:
      return "full";
    case Variant::kAnchored:
      return "anchored";
  }
  return "";
}

Variant parse_variant(const std::string& name) {
  if (name == "cascaded") return Variant::kCascaded;
  if (name == "full") return Variant::kFull;
  if (name == "anchored") return Variant::kAnchored;
  throw Error("unknown selector variant: " + name);
}

PairMask valid_pair_mask(const CnfFormula& f) {
  const int n = f.total_clauses();
  PairMask m;
  m.valid = Matrix::Zero(n, n);
  m.pivot.assign(n, std::vector<int>(n, 0));
  std::unordered_set<std::string> pool;
  for (int id = 1; id <= n; ++id) pool.insert(f.clause(id).encode());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      std::vector<int> pivots = resolvable_pivots(f.clause(i + 1), f.clause(j + 1));
      if (pivots.empty()) continue;
      int p = pivots.front();
      m.pivot[i][j] = m.pivot[j][i] = p;
      Clause r = resolve(f.clause(i + 1), f.clause(j + 1), p);
      if (r.tautology || pool.count(r.encode()) > 0) continue;
      m.valid(i, j) = m.valid(j, i) = 1.0;
      m.any_valid = true;
    }
  }
  return m;
}

namespace {

// Canonical clause-id order: content first, id as the final separator, so
// score ties resolve identically however the pool happens to be arranged.
bool id_before(const CnfFormula& f, int id_a, int id_b) {
  const Clause& a = f.clause(id_a);
  const Clause& b = f.clause(id_b);
  if (clause_less(a, b)) return true;
  if (clause_less(b, a)) return false;
  return id_a < id_b;
}

struct Cell {
  int c1 = 0;
  int c2 = 0;
  double score = 0.0;
};

void sort_cells_best_first(const CnfFormula& f, std::vector<Cell>& cells) {
  std::sort(cells.begin(), cells.end(), [&f](const Cell& x, const Cell& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.c1 != y.c1) return id_before(f, x.c1, y.c1);
    if (x.c2 != y.c2) return id_before(f, x.c2, y.c2);
    return false;
  });
}

std::vector<Cell> ranked_valid_cells(const CnfFormula& f, const Matrix& scores,
                                     const Matrix& valid,
                                     const std::vector<int>& row_ids,
                                     const std::vector<int>& col_ids) {
  std::vector<Cell> cells;
  for (int i = 0; i < scores.rows(); ++i)
    for (int j = 0; j < scores.cols(); ++j)
      if (valid(i, j) != 0.0)
        cells.push_back(Cell{row_ids[i], col_ids[j], scores(i, j)});
  sort_cells_best_first(f, cells);
  return cells;
}

// Best row of an n x 1 score column under the canonical tie-break; the id of
// row i is i + 1. Returns 0 when every row is masked.
int best_clause_row(const CnfFormula& f, const Matrix& scores,
                    const Matrix& valid) {
  int best = 0;
  for (int i = 0; i < scores.rows(); ++i) {
    if (valid(i, 0) == 0.0) continue;
    int id = i + 1;
    if (best == 0 || scores(i, 0) > scores(best - 1, 0) ||
        (scores(i, 0) == scores(best - 1, 0) && id_before(f, id, best)))
      best = id;
  }
  return best;
}

bool same_pair(int a1, int b1, int a2, int b2) {
  return (a1 == a2 && b1 == b2) || (a1 == b2 && b1 == a2);
}

std::vector<int> iota_ids(int n) {
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i + 1;
  return ids;
}

std::vector<int> ids_from(const std::vector<int>& indices) {
  std::vector<int> ids(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) ids[i] = indices[i] + 1;
  return ids;
}

int index_of(const std::vector<int>& v, int x) {
  return static_cast<int>(std::find(v.begin(), v.end(), x) - v.begin());
}

void require_valid_target(const CnfFormula& f, const PairMask& mask,
                          const TeacherTarget& y) {
  const int n = f.total_clauses();
  if (y.c1 < 1 || y.c1 > n || y.c2 < 1 || y.c2 > n || y.c1 == y.c2 ||
      mask.valid(y.c1 - 1, y.c2 - 1) == 0.0)
    throw TeacherStepInvalid("teacher pair (" + std::to_string(y.c1) + ", " +
                             std::to_string(y.c2) +
                             ") is not a valid resolution step");
}

// Additive attention scores over the rows of `entries`: one scalar per row,
// tanh(q W1 + entries W2) uT in the row-vector convention.
Var additive_scores(Tape& t, const ParameterStore& s, Var q, Var entries,
                    const std::string& w1, const std::string& w2,
                    const std::string& u) {
  Var qw = matmul(t, q, param(t, s, w1));
  Var ew = matmul(t, entries, param(t, s, w2));
  Var z = tanh_op(t, add_row(t, ew, qw));
  return matmul_nt(t, z, param(t, s, u));
}

// Scaled dot-product grid between two row sets of clause embeddings.
Var attn_grid(Tape& t, const ParameterStore& s, Var q_rows, Var k_rows) {
  int d = static_cast<int>(s.value("selector/W_Q").cols());
  Var q = matmul(t, q_rows, param(t, s, "selector/W_Q"));
  Var k = matmul(t, k_rows, param(t, s, "selector/W_K"));
  return scale(t, matmul_nt(t, q, k), 1.0 / std::sqrt(static_cast<double>(d)));
}

// ---- cascaded ----------------------------------------------------------

struct Stage2 {
  Var scores = -1;  // n x 1, one score per candidate partner
  Matrix valid;     // n x 1, partners of the conditioning clause
};

Stage2 cascaded_stage2(Tape& t, const ParameterStore& s,
                       const EmbeddingState& st, const PairMask& mask,
                       Var mean_l, int c1) {
  Var e1 = gather_rows(t, st.cls_h, {c1 - 1});
  Var q2 = concat_cols(t, mean_l, e1);
  Stage2 out;
  out.scores = additive_scores(t, s, q2, st.cls_h, "selector/W1",
                               "selector/W2", "selector/u");
  out.valid = mask.valid.row(c1 - 1).transpose();
  return out;
}

struct CascadedPass {
  Var mean_l = -1;
  Var s1 = -1, ls1 = -1;
  Matrix valid1;
  int c1 = 0;
  Stage2 stage2;  // conditioned on the greedy c1
  Var ls2 = -1;
  int c2 = 0;
};

CascadedPass run_cascaded(Tape& t, const ParameterStore& s, const CnfFormula& f,
                          const EmbeddingState& st, const PairMask& mask) {
  const int n = f.total_clauses();
  CascadedPass p;
  p.mean_l = mean_rows(t, st.lit_h);
  Var q1 = concat_cols(t, p.mean_l, t.constant(Matrix::Zero(1, t.cols(st.lit_h))));
  p.valid1 = Matrix::Zero(n, 1);
  for (int i = 0; i < n; ++i)
    if (mask.valid.row(i).sum() > 0.0) p.valid1(i, 0) = 1.0;
  p.s1 = additive_scores(t, s, q1, st.cls_h, "selector/W1", "selector/W2",
                         "selector/u");
  p.ls1 = masked_log_softmax(t, p.s1, p.valid1);
  p.c1 = best_clause_row(f, t.val(p.s1), p.valid1);
  p.stage2 = cascaded_stage2(t, s, st, mask, p.mean_l, p.c1);
  p.ls2 = masked_log_softmax(t, p.stage2.scores, p.stage2.valid);
  p.c2 = best_clause_row(f, t.val(p.stage2.scores), p.stage2.valid);
  return p;
}

SelectorOutput select_cascaded(Tape& t, const ParameterStore& s,
                               const CnfFormula& f, const EmbeddingState& st,
                               const PairMask& mask,
                               const TeacherTarget* target) {
  CascadedPass p = run_cascaded(t, s, f, st, mask);
  SelectorOutput out;
  out.choice = PairChoice{p.c1, p.c2, mask.pivot[p.c1 - 1][p.c2 - 1],
                          t.val(p.stage2.scores)(p.c2 - 1, 0), 0};
  // Grid rows are the stage-2 candidates; the single column labels the
  // conditioning clause.
  out.grid = ScoreGrid{t.val(p.stage2.scores), p.stage2.valid,
                       iota_ids(f.total_clauses()), {p.c1}};
  int a = target ? target->c1 : p.c1;
  int b = target ? target->c2 : p.c2;
  Var ls2 = p.ls2;
  if (a != p.c1) {
    Stage2 forced = cascaded_stage2(t, s, st, mask, p.mean_l, a);
    ls2 = masked_log_softmax(t, forced.scores, forced.valid);
  }
  out.log_prob = add(t, pick(t, p.ls1, a - 1, 0), pick(t, ls2, b - 1, 0));
  out.argmax_match = target != nullptr && same_pair(p.c1, p.c2, a, b);
  return out;
}

// ---- full grid ---------------------------------------------------------

SelectorOutput select_full(Tape& t, const ParameterStore& s,
                           const CnfFormula& f, const EmbeddingState& st,
                           const PairMask& mask, const TeacherTarget* target) {
  Var grid = attn_grid(t, s, st.cls_h, st.cls_h);
  Var lsm = masked_log_softmax(t, grid, mask.valid);
  std::vector<int> ids = iota_ids(f.total_clauses());
  std::vector<Cell> ranked =
      ranked_valid_cells(f, t.val(grid), mask.valid, ids, ids);
  const Cell& top = ranked.front();
  SelectorOutput out;
  out.choice =
      PairChoice{top.c1, top.c2, mask.pivot[top.c1 - 1][top.c2 - 1], top.score, 0};
  out.grid = ScoreGrid{t.val(grid), mask.valid, ids, ids};
  int a = target ? target->c1 : top.c1;
  int b = target ? target->c2 : top.c2;
  out.log_prob = pick(t, lsm, a - 1, b - 1);
  out.argmax_match = target != nullptr && same_pair(top.c1, top.c2, a, b);
  return out;
}

// ---- anchored ----------------------------------------------------------

struct Occurrence {
  std::vector<std::vector<int>> pos, neg;  // variable -> 0-based clause indices
};

Occurrence occurrences(const CnfFormula& f) {
  Occurrence o;
  o.pos.assign(f.num_vars + 1, {});
  o.neg.assign(f.num_vars + 1, {});
  for (int id = 1; id <= f.total_clauses(); ++id)
    for (int l : f.clause(id).lits)
      (l > 0 ? o.pos[l] : o.neg[-l]).push_back(id - 1);
  return o;
}

struct AnchoredGrid {
  std::vector<int> rows, cols;  // 0-based clause indices
  Var scores = -1;
  Matrix valid;
  Var lsm = -1;
};

AnchoredGrid anchored_grid(Tape& t, const ParameterStore& s,
                           const EmbeddingState& st, const PairMask& mask,
                           const Occurrence& occ, int v) {
  AnchoredGrid g;
  g.rows = occ.pos[v];
  g.cols = occ.neg[v];
  g.scores = attn_grid(t, s, gather_rows(t, st.cls_h, g.rows),
                       gather_rows(t, st.cls_h, g.cols));
  g.valid = Matrix::Zero(g.rows.size(), g.cols.size());
  for (size_t i = 0; i < g.rows.size(); ++i)
    for (size_t j = 0; j < g.cols.size(); ++j)
      g.valid(i, j) = mask.valid(g.rows[i], g.cols[j]);
  g.lsm = masked_log_softmax(t, g.scores, g.valid);
  return g;
}

struct AnchoredPass {
  Occurrence occ;
  Matrix adm;  // num_vars x 1, variables anchoring at least one valid cell
  Var sA = -1, lsA = -1;
  int v = 0;          // greedy anchor
  AnchoredGrid grid;  // grid of the greedy anchor
  Cell best;
};

AnchoredPass run_anchored(Tape& t, const ParameterStore& s, const CnfFormula& f,
                          const EmbeddingState& st, const PairMask& mask) {
  AnchoredPass p;
  p.occ = occurrences(f);
  const int num_vars = f.num_vars;
  p.adm = Matrix::Zero(num_vars, 1);
  for (int v = 1; v <= num_vars; ++v) {
    bool ok = false;
    for (int i : p.occ.pos[v]) {
      for (int j : p.occ.neg[v])
        if (mask.valid(i, j) != 0.0) {
          ok = true;
          break;
        }
      if (ok) break;
    }
    if (ok) p.adm(v - 1, 0) = 1.0;
  }
  if (p.adm.sum() == 0.0)
    throw NoValidPair("no variable anchors a valid pair");
  std::vector<int> pos_rows(num_vars), neg_rows(num_vars);
  for (int v = 1; v <= num_vars; ++v) {
    pos_rows[v - 1] = FormulaGraph::lit_row(v);
    neg_rows[v - 1] = FormulaGraph::lit_row(-v);
  }
  Var both = add(t, gather_rows(t, st.lit_h, pos_rows),
                 gather_rows(t, st.lit_h, neg_rows));
  Var mean_c = mean_rows(t, st.cls_h);
  p.sA = additive_scores(t, s, mean_c, both, "selector/anchor_W1",
                         "selector/anchor_W2", "selector/anchor_u");
  p.lsA = masked_log_softmax(t, p.sA, p.adm);
  const Matrix& av = t.val(p.sA);
  for (int v = 1; v <= num_vars; ++v) {
    if (p.adm(v - 1, 0) == 0.0) continue;
    if (p.v == 0 || av(v - 1, 0) > av(p.v - 1, 0)) p.v = v;
  }
  p.grid = anchored_grid(t, s, st, mask, p.occ, p.v);
  std::vector<Cell> ranked =
      ranked_valid_cells(f, t.val(p.grid.scores), p.grid.valid,
                         ids_from(p.grid.rows), ids_from(p.grid.cols));
  p.best = ranked.front();
  return p;
}

SelectorOutput select_anchored(Tape& t, const ParameterStore& s,
                               const CnfFormula& f, const EmbeddingState& st,
                               const PairMask& mask,
                               const TeacherTarget* target) {
  AnchoredPass p = run_anchored(t, s, f, st, mask);
  SelectorOutput out;
  out.choice = PairChoice{p.best.c1, p.best.c2, p.v, p.best.score, p.v};
  out.grid = ScoreGrid{t.val(p.grid.scores), p.grid.valid,
                       ids_from(p.grid.rows), ids_from(p.grid.cols)};
  int vt = p.v;
  int row_id = p.best.c1;
  int col_id = p.best.c2;
  AnchoredGrid forced;
  const AnchoredGrid* g = &p.grid;
  if (target) {
    vt = mask.pivot[target->c1 - 1][target->c2 - 1];
    // The grid is oriented: rows hold the positive-pivot parent.
    bool c1_is_row = f.clause(target->c1).contains(vt) &&
                     f.clause(target->c2).contains(-vt);
    row_id = c1_is_row ? target->c1 : target->c2;
    col_id = c1_is_row ? target->c2 : target->c1;
    if (vt != p.v) {
      forced = anchored_grid(t, s, st, mask, p.occ, vt);
      g = &forced;
    }
  }
  int ri = index_of(g->rows, row_id - 1);
  int ci = index_of(g->cols, col_id - 1);
  out.log_prob = add(t, pick(t, p.lsA, vt - 1, 0), pick(t, g->lsm, ri, ci));
  out.argmax_match =
      target != nullptr && same_pair(p.best.c1, p.best.c2, target->c1, target->c2);
  return out;
}

void check_state_shapes(Tape& t, const CnfFormula& f, const EmbeddingState& st,
                        const PairMask& mask) {
  const int n = f.total_clauses();
  if (mask.valid.rows() != n || mask.valid.cols() != n)
    throw ShapeMismatch("pair mask covers " + std::to_string(mask.valid.rows()) +
                        " clauses for a pool of " + std::to_string(n));
  if (t.rows(st.cls_h) != n || t.rows(st.lit_h) != 2 * f.num_vars)
    throw ShapeMismatch("embedding state does not match the formula");
}

}  // namespace

SelectorOutput select_pair(Tape& t, const ParameterStore& s, Variant variant,
                           const CnfFormula& f, const EmbeddingState& st,
                           const PairMask& mask, const TeacherTarget* target) {
  check_state_shapes(t, f, st, mask);
  if (!mask.any_valid)
    throw NoValidPair("pool of " + std::to_string(f.total_clauses()) +
                      " clauses admits no resolution step");
  if (target) require_valid_target(f, mask, *target);
  switch (variant) {
    case Variant::kCascaded:
      return select_cascaded(t, s, f, st, mask, target);
    case Variant::kFull:
      return select_full(t, s, f, st, mask, target);
    case Variant::kAnchored:
      return select_anchored(t, s, f, st, mask, target);
  }
  throw Error("unreachable selector variant");
}

std::vector<PairChoice> top_k_steps(Tape& t, const ParameterStore& s,
                                    Variant variant, CnfFormula& f,
                                    const EmbeddingState& st, int k) {
  if (k < 1) throw Error("top_k_steps needs k >= 1, got " + std::to_string(k));
  PairMask mask = valid_pair_mask(f);
  check_state_shapes(t, f, st, mask);
  if (!mask.any_valid)
    throw NoValidPair("pool of " + std::to_string(f.total_clauses()) +
                      " clauses admits no resolution step");

  std::vector<Cell> ranked;
  int anchor = 0;
  switch (variant) {
    case Variant::kFull: {
      Var grid = attn_grid(t, s, st.cls_h, st.cls_h);
      std::vector<int> ids = iota_ids(f.total_clauses());
      ranked = ranked_valid_cells(f, t.val(grid), mask.valid, ids, ids);
      break;
    }
    case Variant::kCascaded: {
      CascadedPass p = run_cascaded(t, s, f, st, mask);
      const Matrix& sc = t.val(p.stage2.scores);
      for (int j = 0; j < sc.rows(); ++j)
        if (p.stage2.valid(j, 0) != 0.0)
          ranked.push_back(Cell{p.c1, j + 1, sc(j, 0)});
      sort_cells_best_first(f, ranked);
      break;
    }
    case Variant::kAnchored: {
      AnchoredPass p = run_anchored(t, s, f, st, mask);
      ranked = ranked_valid_cells(f, t.val(p.grid.scores), p.grid.valid,
                                  ids_from(p.grid.rows), ids_from(p.grid.cols));
      anchor = p.v;
      break;
    }
  }

  // Picks reference the pre-batch pool, but each resolvent joins it, so an
  // encode set over the growing pool drops in-batch duplicates.
  std::unordered_set<std::string> pool;
  for (int id = 1; id <= f.total_clauses(); ++id)
    pool.insert(f.clause(id).encode());
  std::vector<PairChoice> out;
  for (const Cell& c : ranked) {
    if (static_cast<int>(out.size()) == k) break;
    int pivot = mask.pivot[c.c1 - 1][c.c2 - 1];
    Clause r = resolve(f.clause(c.c1), f.clause(c.c2), pivot);
    if (!pool.insert(r.encode()).second) continue;
    bool closes = r.empty();
    f.append_derived(std::move(r));
    out.push_back(PairChoice{c.c1, c.c2, pivot, c.score, anchor});
    if (closes) break;
  }
  return out;
}

// ---- selection-head parameters ------------------------------------------

void selector_define(ParameterStore& s, Variant variant, int d, Rng& rng) {
  double unit = 1.0 / std::sqrt(static_cast<double>(d));
  double pair = 1.0 / std::sqrt(2.0 * d);
  switch (variant) {
    case Variant::kCascaded:
      s.define("selector/W1", 2 * d, d, rng, pair);
      s.define("selector/W2", d, d, rng, unit);
      s.define("selector/u", 1, d, rng, unit);
      break;
    case Variant::kFull:
      s.define("selector/W_Q", d, d, rng, unit);
      s.define("selector/W_K", d, d, rng, unit);
      break;
    case Variant::kAnchored:
      s.define("selector/anchor_W1", d, d, rng, unit);
      s.define("selector/anchor_W2", d, d, rng, unit);
      s.define("selector/anchor_u", 1, d, rng, unit);
      s.define("selector/W_Q", d, d, rng, unit);
      s.define("selector/W_K", d, d, rng, unit);
      break;
  }
}

// ---- assignment decoding -------------------------------------------------

void decoder_define(ParameterStore& s, int d, Rng& rng) {
  mlp_define(s, "decoder", {d, d, 1}, false, rng);
}

Var decode_literal_logits(Tape& t, const ParameterStore& s,
                          const EmbeddingState& st) {
  return mlp_forward(t, s, "decoder", st.lit_h, Act::kSigmoid, Act::kNone);
}

namespace {

std::vector<int> positive_rows(int lit_rows) {
  std::vector<int> rows;
  rows.reserve(lit_rows / 2);
  for (int r = 0; r < lit_rows; r += 2) rows.push_back(r);
  return rows;
}

}  // namespace

Var decode_positive_logits(Tape& t, const ParameterStore& s,
                           const EmbeddingState& st) {
  Var pos = gather_rows(t, st.lit_h, positive_rows(t.rows(st.lit_h)));
  return mlp_forward(t, s, "decoder", pos, Act::kSigmoid, Act::kNone);
}

Assignment decode_assignment(Tape& t, const ParameterStore& s,
                             const EmbeddingState& st, Branch branch) {
  const Matrix& z = t.val(decode_literal_logits(t, s, st));
  const int num_vars = static_cast<int>(z.rows()) / 2;
  Assignment a(num_vars);
  for (int v = 1; v <= num_vars; ++v) {
    int row = FormulaGraph::lit_row(branch == Branch::kPositive ? v : -v);
    // sigmoid(z) > 0.5 exactly when z > 0, so the tie at 0.5 falls to false
    // without evaluating the sigmoid.
    bool lit_true = z(row, 0) > 0.0;
    a.set(v, branch == Branch::kPositive ? lit_true : !lit_true);
  }
  return a;
}

// ---- satisfiability classification ---------------------------------------

void classifier_define(ParameterStore& s, int d, Rng& rng) {
  mlp_define(s, "classifier", {d, d, d, 1}, false, rng);
}

Var classify_logit(Tape& t, const ParameterStore& s, const EmbeddingState& st) {
  Var pos = gather_rows(t, st.lit_h, positive_rows(t.rows(st.lit_h)));
  Var votes = mlp_forward(t, s, "classifier", pos, Act::kTanh, Act::kNone);
  return mean_rows(t, votes);
}

double classify_satisfiability(Tape& t, const ParameterStore& s,
                               const EmbeddingState& st) {
  double z = t.val(classify_logit(t, s, st))(0, 0);
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace resolv
