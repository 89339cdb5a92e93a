#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "resolv/dataset.hpp"
#include "resolv/policy.hpp"

namespace resolv {

// Episode-level training hyperparameters. Proof-step losses are discounted
// by gamma^(T-t) for step t of T, so the final step of every episode counts
// in full and earlier steps count less; the intuition is that the formula
// gets easier with each derived clause, so late mistakes matter more.
struct TrainConfig {
  int d = 128;             // embedding width
  int rounds = 16;         // message rounds before the first step
  int epochs = 50;
  double lr0 = 5e-5;       // annealed linearly to zero over all updates
  double gamma = 0.99;     // per-step discount, in (0, 1]
  double clip_norm = 0.5;  // global gradient-norm ceiling
  EmbedMode mode = EmbedMode::kDynamic;
  Variant variant = Variant::kFull;
  int sat_step_cap = 16;  // sat episodes derive min(num_vars, cap) clauses
  uint64_t seed = 0;

  void validate() const;  // throws Error on out-of-range fields
};

// One training example in memory: the formula plus its certificate. Unsat
// episodes carry a resolution proof ending in the empty clause; sat episodes
// carry a complete satisfying assignment.
struct Episode {
  std::string id;
  CnfFormula formula;  // input clauses only
  bool sat = false;
  ResolutionProof proof;
  Assignment assignment;
};

// Materializes a manifest record; the record must have a verdict and a
// certificate path (Error otherwise). Paths resolve relative to `dir`.
Episode load_episode(const ManifestRecord& rec, const std::string& dir);
std::vector<Episode> load_episodes(const std::string& manifest_path);

// ---- episode losses -------------------------------------------------------

// Discounted proof loss: -(1/T) sum_t log p(y_t) * gamma^(T-t) for t = 1..T.
// The plain form takes per-step log-probabilities; the tape form combines
// 1x1 log-probability nodes into a differentiable 1x1 loss. Throws Error on
// an empty step list or gamma outside (0, 1].
double resolution_loss(const std::vector<double>& step_log_probs, double gamma);
Var resolution_loss(Tape& t, const std::vector<Var>& step_log_probs,
                    double gamma);

// Discounted assignment loss: (1/T) sum_t [gamma^(T-t)/|V| sum_v BCE_v],
// binary cross-entropy of the decoded truth value of every variable against
// one fixed target assignment, evaluated once per derivation step. The plain
// form takes per-step probability vectors and 0/1 target bits; the tape form
// takes per-step V x 1 logit nodes and a V x 1 0/1 target column.
double sat_loss(const std::vector<std::vector<double>>& step_probs,
                const std::vector<int>& target_bits, double gamma);
Var sat_loss(Tape& t, const std::vector<Var>& step_logits,
             const Matrix& target_bits, double gamma);

// ---- teacher-forced episodes ------------------------------------------------

struct EpisodeStats {
  int steps = 0;        // scored proof steps, or decoder evaluations if sat
  int argmax_hits = 0;  // unsat only: greedy pick equalled the teacher pair
};

// Runs one episode on the tape and returns its 1x1 loss node.
//
// Unsat: the certificate's pairs are imposed over the whole run, the model's
// log-likelihood of each pair enters the proof loss, and each resolvent is
// appended and integrated per cfg.mode (the final empty clause terminates
// the episode and is not integrated). Throws TeacherStepInvalid when a
// certificate pair fails validity masking, which signals data corruption.
//
// Sat: the model takes its own greedy derivation steps, up to
// min(num_vars, cfg.sat_step_cap) of them or until no valid pair remains,
// and the decoder's positive-branch logits are scored against the stored
// assignment after each integration. A formula admitting no derivation at
// all is scored once on its initial embedding.
Var episode_loss(Tape& t, const ParameterStore& s, const Episode& ep,
                 const TrainConfig& cfg, EpisodeStats* stats = nullptr);

struct EpisodeResult {
  double loss = 0;
  GradMap grads;  // unclipped
  EpisodeStats stats;
};

// episode_loss on a fresh tape followed by one backward pass.
EpisodeResult teacher_force_episode(const ParameterStore& s, const Episode& ep,
                                    const TrainConfig& cfg);

// ---- training loop ---------------------------------------------------------

struct TrainHooks {
  // Called after every epoch with (epoch index, mean episode loss); return
  // false to stop early. Useful for held-out evaluation and early stopping.
  std::function<bool(int, double)> epoch_end;
};

struct TrainResult {
  int epochs_run = 0;
  int64_t updates = 0;
  double first_epoch_loss = 0;  // mean episode loss of the first epoch run
  double final_epoch_loss = 0;
};

// One Adam update per episode with global-norm clipping and a learning rate
// annealed linearly from lr0 to exactly zero at the last planned update.
// Episode order reshuffles every epoch from a stream keyed by (cfg.seed,
// epoch_offset + epoch), interleaving sat and unsat records uniformly; the
// whole run is a pure function of (parameters, data, cfg), so reruns are
// bit-identical. When `log` is given, one CSV row per episode is appended:
// epoch,episode,loss,lr,grad_norm (grad_norm is the pre-clip global norm).
TrainResult train(const std::vector<Episode>& data, ParameterStore& s,
                  const TrainConfig& cfg, std::ostream* log = nullptr,
                  const TrainHooks& hooks = {}, int epoch_offset = 0);

// Loads the manifest's episodes and trains, writing the CSV (with header)
// to log_csv unless it is empty.
TrainResult train(const std::string& manifest_path, ParameterStore& s,
                  const TrainConfig& cfg, const std::string& log_csv,
                  const TrainHooks& hooks = {});

// ---- satisfiability-prediction head ----------------------------------------

struct ClassifierResult {
  int epochs_run = 0;
  int64_t updates = 0;
  double final_loss = 0.0;  // mean episode loss of the last epoch
  double accuracy = 0.0;    // training-set accuracy after the last update
};

// Fits the classifier head on episode verdicts while every other parameter
// stays frozen: per episode, the formula is embedded with cfg.rounds rounds,
// the head's mean vote is scored against the sat/unsat label with logistic
// loss, and only "classifier/" gradients reach the optimizer (same clipping
// and annealed schedule as train, shuffle streams keyed the same way). The
// store must already contain classifier parameters. Logs the same CSV row
// shape as train when `log` is given.
ClassifierResult train_classifier(const std::vector<Episode>& data,
                                  ParameterStore& s, const TrainConfig& cfg,
                                  std::ostream* log = nullptr);

// ---- bootstrapped proof shortening ------------------------------------------

// Dataset-level reduction accounting over the unsat records of a manifest.
// Depth counts how many times a record's proof has been replaced; reduction
// percentages compare current against original certificate lengths, and the
// per-proof aggregates run over the reduced records only.
struct ReductionStats {
  int records = 0;             // unsat records scanned
  int reduced_this_pass = 0;   // strict replacements made by one pass
  int max_depth = 0;
  double avg_depth = 0;
  double max_reduction_pct = 0;
  double avg_reduction_pct = 0;
  double proofs_reduced_pct = 0;  // share of records reduced at least once
  double total_reduction_pct = 0;
  int64_t total_steps = 0;  // current dataset proof steps
};

// Pure accounting over manifest fields; reduced_this_pass is left at zero.
ReductionStats reduction_stats(const std::vector<ManifestRecord>& records);

// Installs `candidate` as the record's certificate iff it is strictly
// shorter than the stored proof. A shorter candidate is re-checked against
// the formula first; a failure throws Error, because a model roll that ends
// in the empty clause yet fails replay means the episode bookkeeping is
// broken and nothing written by the pass can be trusted. Longer or equal
// candidates are discarded (returns false) without touching the record.
bool install_shorter_proof(ManifestRecord& rec, const std::string& dir,
                           const CnfFormula& f, const ResolutionProof& candidate);

// One shortening scan: every unsat record is re-proved by pure greedy model
// rolls, capped at 4x the record's current proof length; rolls that derive
// the empty clause are ancestor-pruned and installed when strictly shorter.
// Rolls that hit the cap or saturate leave the record unchanged, so the
// dataset's total step count never increases. The manifest (and any
// replaced .trace files) are rewritten in place.
ReductionStats bootstrap_pass(const std::string& manifest_path,
                              const ParameterStore& s, const TrainConfig& cfg);

// CSV rows per pass with a leading pass column and the ReductionStats
// fields, mirroring the shortening summary table.
void write_reduction_csv(const std::string& path,
                         const std::vector<ReductionStats>& series);

// Alternates cfg.epochs of training with one shortening pass, `passes`
// times, reloading episodes after each pass so training follows the
// shortened certificates. Training rows stream into train_log_csv and the
// per-pass stats into stats_csv (either may be empty to skip). The learning
// rate anneals within each segment.
std::vector<ReductionStats> bootstrap_train(const std::string& manifest_path,
                                            ParameterStore& s,
                                            const TrainConfig& cfg, int passes,
                                            const std::string& train_log_csv,
                                            const std::string& stats_csv);

}  // namespace resolv
