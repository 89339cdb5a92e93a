#pragma once

#include <optional>
#include <string>
#include <vector>

#include "resolv/dataset.hpp"
#include "resolv/policy.hpp"

namespace resolv {

// Outcome of one dual-track episode. kSat and kUnsat are only ever reported
// with a checker-verified certificate in hand; kSaturated means the pool
// admitted no further valid pair before any certificate appeared; kTimeout
// means the derivation budget ran out first.
enum class Verdict { kSat, kUnsat, kSaturated, kTimeout };

std::string verdict_name(Verdict v);

// How the runner picks clause pairs: the trained selection head, or a
// uniform draw over the valid cells of the same mask. The uniform policy is
// the control arm for measuring what the learned scores contribute; it
// keeps the embedding and decoding tracks so satisfiability handling is
// identical across both arms.
enum class PairPolicy { kModel, kRandomValid };

// Episode-runner knobs. k is the selection fan-out: each model call commits
// up to k resolution steps from one forward pass. flat_cap bounds the
// derivation track when no teacher proof length is known.
struct HarnessConfig {
  int rounds = 16;
  EmbedMode mode = EmbedMode::kDynamic;
  Variant variant = Variant::kFull;
  int k = 1;
  int flat_cap = 1000;
  PairPolicy policy = PairPolicy::kModel;
  uint64_t seed = 0;

  void validate() const;  // throws Error on out-of-range fields
};

// Per-episode budgets: resolution steps on the derivation track and decoded
// assignment candidates on the satisfiability track.
struct Limits {
  int max_derivations = 0;
  int max_sat_trials = 0;
};

// Derivation budget is 4x the teacher proof length when one is known and
// cfg.flat_cap otherwise; the satisfiability track gets 2|V| candidate
// checks, each decode reading the positive branch and then the negative one
// while budget remains.
Limits apply_limits(const CnfFormula& f, const HarnessConfig& cfg,
                    int teacher_len = 0);

// One finished episode. certified says a symbolic check backs the verdict:
// always true for kSat (the assignment satisfied every clause) and kUnsat
// (the pruned proof passed the checker), true for kSaturated because the
// pair mask only ever admits non-tautological resolvents that are new to
// the pool, so an empty mask means the pool is closed under useful
// resolution without containing the empty clause, and false for kTimeout.
struct EpisodeRun {
  std::string id;
  Verdict verdict = Verdict::kTimeout;
  bool certified = false;
  ResolutionProof proof;   // ancestor-pruned refutation when kUnsat
  Assignment assignment;   // checked model when kSat
  int derivations = 0;     // raw resolution steps committed
  int model_calls = 0;     // forward passes, initial embedding included
  int sat_trials = 0;      // assignment candidates checked
  double wall_ms = 0.0;
};

// Runs the two tracks against one formula until a certificate appears, the
// pool saturates, or the derivation budget is spent. The rng only feeds the
// kRandomValid policy; model episodes are deterministic in the parameters.
EpisodeRun run_episode(const CnfFormula& f, const ParameterStore& s,
                       const HarnessConfig& cfg, const Limits& limits,
                       Rng& rng);

// Convenience form: limits from apply_limits with no teacher length, rng
// seeded from cfg.seed.
EpisodeRun run_episode(const CnfFormula& f, const ParameterStore& s,
                       const HarnessConfig& cfg);

// Aggregate metrics over one manifest. Percentages are over the records of
// the relevant verdict ("proven" counts certified outcomes, with certified
// saturation counting toward satisfiable). Proof-length ratio and model
// calls are normalized by the stored certificate length and averaged over
// solved unsatisfiable records only; both are absent when nothing was
// solved. predicted_pct is the classifier head's accuracy over all records
// and is absent when the store carries no classifier parameters.
struct EvalReport {
  int records = 0;
  int sat_records = 0;
  int unsat_records = 0;
  int proven_sat = 0;
  int proven_unsat = 0;
  int timeouts = 0;
  double proven_sat_pct = 0.0;
  double proven_unsat_pct = 0.0;
  double total_proven_pct = 0.0;
  std::optional<double> predicted_pct;
  std::optional<double> mean_proof_ratio;
  std::optional<double> mean_model_calls;
  double wall_ms = 0.0;
};

std::string eval_report_json(const EvalReport& r);

// Runs every manifest record through run_episode with per-record limits
// (unsat records get the 4x budget of their stored proof) and aggregates.
// Episode randomness for the kRandomValid arm derives from (cfg.seed,
// record index) so reruns are identical.
EvalReport evaluate(const std::string& manifest_path, const ParameterStore& s,
                    const HarnessConfig& cfg);

// One row of a satisfiability success curve: among `count` freshly sampled
// satisfiable formulas with n variables, the share proven within the first
// `iterations` resolution steps (iteration 0 is the decode of the initial
// embedding). trial_budget is the matching candidate-check budget, two per
// decode opportunity, capped by the 2|V| track limit.
struct CurvePoint {
  std::string distribution;
  int iterations = 0;
  int trial_budget = 0;
  double success_pct = 0.0;
};

// Success-over-budget curves for one formula size per entry of `sizes`.
// Formulas are drawn from the paired generator's satisfiable side with the
// size pinned; episode e of size index si derives its randomness from
// (cfg.seed, si * count + e). Rows are emitted per size for iteration
// budgets 0..n, so success_pct is non-decreasing within a size.
std::vector<CurvePoint> generalization_curve(const std::vector<int>& sizes,
                                             int count,
                                             const ParameterStore& s,
                                             const HarnessConfig& cfg);

// Plot-ready CSV: distribution,iterations,trial_budget,success_pct.
void write_curve_csv(const std::string& path,
                     const std::vector<CurvePoint>& points);

}  // namespace resolv
