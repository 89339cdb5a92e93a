#include "resolv/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "resolv/io.hpp"

namespace resolv {

void TrainConfig::validate() const {
  if (d < 1) throw Error("embedding width must be at least 1");
  if (rounds < 1) throw Error("message rounds must be at least 1");
  if (epochs < 1) throw Error("epoch count must be at least 1");
  if (!(lr0 > 0)) throw Error("initial learning rate must be positive");
  if (!(gamma > 0) || gamma > 1) throw Error("discount must be in (0, 1]");
  if (!(clip_norm > 0)) throw Error("clip norm must be positive");
  if (sat_step_cap < 1) throw Error("sat step cap must be at least 1");
}

Episode load_episode(const ManifestRecord& rec, const std::string& dir) {
  if (rec.certificate.empty())
    throw Error("record '" + rec.id + "' has no certificate");
  Episode ep;
  ep.id = rec.id;
  ep.formula = parse_dimacs(read_file(dir + "/" + rec.cnf));
  if (rec.verdict == "unsat") {
    ep.proof = parse_trace(read_file(dir + "/" + rec.certificate));
  } else if (rec.verdict == "sat") {
    ep.sat = true;
    ep.assignment = parse_assignment(read_file(dir + "/" + rec.certificate),
                                     ep.formula.num_vars);
  } else {
    throw Error("record '" + rec.id + "' has verdict '" + rec.verdict +
                "', expected sat or unsat");
  }
  return ep;
}

std::vector<Episode> load_episodes(const std::string& manifest_path) {
  std::string dir = manifest_dir(manifest_path);
  std::vector<Episode> out;
  for (const ManifestRecord& rec : read_manifest(manifest_path))
    out.push_back(load_episode(rec, dir));
  return out;
}

// ---- episode losses -------------------------------------------------------

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0) || gamma > 1) throw Error("discount must be in (0, 1]");
}

void check_scalar(Tape& t, Var v, const char* what) {
  if (t.rows(v) != 1 || t.cols(v) != 1)
    throw ShapeMismatch(std::string(what) + " must be 1x1");
}

}  // namespace

double resolution_loss(const std::vector<double>& step_log_probs,
                       double gamma) {
  check_gamma(gamma);
  if (step_log_probs.empty()) throw Error("proof loss needs at least one step");
  int T = static_cast<int>(step_log_probs.size());
  double acc = 0;
  for (int t = 0; t < T; ++t)
    acc += step_log_probs[t] * std::pow(gamma, T - 1 - t);
  return -acc / T;
}

Var resolution_loss(Tape& t, const std::vector<Var>& step_log_probs,
                    double gamma) {
  check_gamma(gamma);
  if (step_log_probs.empty()) throw Error("proof loss needs at least one step");
  int T = static_cast<int>(step_log_probs.size());
  Var acc = -1;
  for (int i = 0; i < T; ++i) {
    check_scalar(t, step_log_probs[i], "step log-probability");
    Var term = scale(t, step_log_probs[i], -std::pow(gamma, T - 1 - i) / T);
    acc = i == 0 ? term : add(t, acc, term);
  }
  return acc;
}

double sat_loss(const std::vector<std::vector<double>>& step_probs,
                const std::vector<int>& target_bits, double gamma) {
  check_gamma(gamma);
  if (step_probs.empty())
    throw Error("assignment loss needs at least one step");
  if (target_bits.empty()) throw Error("assignment loss needs target bits");
  int T = static_cast<int>(step_probs.size());
  int V = static_cast<int>(target_bits.size());
  double acc = 0;
  for (int t = 0; t < T; ++t) {
    if (static_cast<int>(step_probs[t].size()) != V)
      throw ShapeMismatch("step probabilities must cover every variable");
    double bce = 0;
    for (int v = 0; v < V; ++v) {
      // Branch on the bit so an exactly matched 0/1 output costs exactly 0
      // instead of evaluating 0 * log(0).
      double p = step_probs[t][v];
      bce += target_bits[v] ? -std::log(p) : -std::log1p(-p);
    }
    acc += std::pow(gamma, T - 1 - t) * bce / V;
  }
  return acc / T;
}

Var sat_loss(Tape& t, const std::vector<Var>& step_logits,
             const Matrix& target_bits, double gamma) {
  check_gamma(gamma);
  if (step_logits.empty())
    throw Error("assignment loss needs at least one step");
  if (target_bits.cols() != 1 || target_bits.rows() < 1)
    throw ShapeMismatch("target bits must be a nonempty column");
  int T = static_cast<int>(step_logits.size());
  Var acc = -1;
  for (int i = 0; i < T; ++i) {
    Var bce = bce_logits_mean(t, step_logits[i], target_bits);
    Var term = scale(t, bce, std::pow(gamma, T - 1 - i) / T);
    acc = i == 0 ? term : add(t, acc, term);
  }
  return acc;
}

// ---- teacher-forced episodes ------------------------------------------------

namespace {

Var unsat_episode_loss(Tape& t, const ParameterStore& s, const Episode& ep,
                       const TrainConfig& cfg, EpisodeStats* stats) {
  if (ep.proof.steps.empty())
    throw Error("unsat episode '" + ep.id + "' has an empty proof");
  CnfFormula f = ep.formula;
  FormulaGraph g = build_graph(f);
  EmbeddingState st = embed_formula(t, s, g, cfg.rounds);
  std::vector<Var> lps;
  lps.reserve(ep.proof.steps.size());
  for (const ResolutionStep& step : ep.proof.steps) {
    PairMask mask = valid_pair_mask(f);
    TeacherTarget target{step.parent_a, step.parent_b};
    SelectorOutput out = select_pair(t, s, cfg.variant, f, st, mask, &target);
    lps.push_back(out.log_prob);
    if (stats) {
      stats->steps += 1;
      stats->argmax_hits += out.argmax_match ? 1 : 0;
    }
    // Append the recomputed resolvent; a pair that passed the mask resolves
    // on exactly one variable, so this matches the certificate's clause.
    Clause r = resolve(f.clause(step.parent_a), f.clause(step.parent_b),
                       step.pivot);
    bool done = r.empty();
    int id = f.append_derived(std::move(r));
    g.append_clause(f.clause(id));
    if (!done) st = integrate_derived(t, s, g, st, cfg.mode);
  }
  return resolution_loss(t, lps, cfg.gamma);
}

Var sat_episode_loss(Tape& t, const ParameterStore& s, const Episode& ep,
                     const TrainConfig& cfg, EpisodeStats* stats) {
  if (!ep.assignment.complete() ||
      ep.assignment.num_vars() != ep.formula.num_vars)
    throw Error("sat episode '" + ep.id + "' lacks a complete assignment");
  CnfFormula f = ep.formula;
  FormulaGraph g = build_graph(f);
  EmbeddingState st = embed_formula(t, s, g, cfg.rounds);
  Matrix target(f.num_vars, 1);
  for (int v = 1; v <= f.num_vars; ++v)
    target(v - 1, 0) = ep.assignment.value(v) ? 1.0 : 0.0;
  int cap = std::min(f.num_vars, cfg.sat_step_cap);
  std::vector<Var> logits;
  for (int i = 0; i < cap; ++i) {
    PairMask mask = valid_pair_mask(f);
    if (!mask.any_valid) break;  // saturated early
    SelectorOutput out = select_pair(t, s, cfg.variant, f, st, mask);
    int id = f.append_derived(resolve(f.clause(out.choice.c1),
                                      f.clause(out.choice.c2),
                                      out.choice.pivot));
    g.append_clause(f.clause(id));
    st = integrate_derived(t, s, g, st, cfg.mode);
    logits.push_back(decode_positive_logits(t, s, st));
    if (stats) stats->steps += 1;
  }
  if (logits.empty()) {
    // Nothing to derive (e.g. a formula of unit clauses): score the initial
    // embedding once so the episode still has a defined loss.
    logits.push_back(decode_positive_logits(t, s, st));
    if (stats) stats->steps += 1;
  }
  return sat_loss(t, logits, target, cfg.gamma);
}

}  // namespace

Var episode_loss(Tape& t, const ParameterStore& s, const Episode& ep,
                 const TrainConfig& cfg, EpisodeStats* stats) {
  cfg.validate();
  if (!ep.formula.derived_clauses.empty())
    throw Error("episode formula must hold input clauses only");
  return ep.sat ? sat_episode_loss(t, s, ep, cfg, stats)
                : unsat_episode_loss(t, s, ep, cfg, stats);
}

EpisodeResult teacher_force_episode(const ParameterStore& s, const Episode& ep,
                                    const TrainConfig& cfg) {
  Tape tape;
  EpisodeResult res;
  Var loss = episode_loss(tape, s, ep, cfg, &res.stats);
  tape.backward(loss);
  res.loss = tape.val(loss)(0, 0);
  res.grads = tape.param_grads();
  return res;
}

// ---- training loop ---------------------------------------------------------

TrainResult train(const std::vector<Episode>& data, ParameterStore& s,
                  const TrainConfig& cfg, std::ostream* log,
                  const TrainHooks& hooks, int epoch_offset) {
  cfg.validate();
  if (data.empty()) throw Error("training needs at least one episode");
  int64_t total = static_cast<int64_t>(cfg.epochs) * data.size();
  TrainResult res;
  std::vector<int> order(data.size());
  Tape tape;
  int64_t update = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng =
        Rng::child(cfg.seed, static_cast<uint64_t>(epoch_offset + epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    for (size_t i = 0; i < order.size(); ++i) {
      tape.reset();
      Var loss = episode_loss(tape, s, data[order[i]], cfg);
      tape.backward(loss);
      GradMap grads = tape.param_grads();
      double norm = clip_gradients(grads, cfg.clip_norm);
      // Anneal over planned updates so the last one lands exactly at zero.
      double lr = lr_schedule(cfg.lr0, update, total - 1);
      s.adam_step(grads, lr);
      ++update;
      double value = tape.val(loss)(0, 0);
      loss_sum += value;
      if (log) {
        std::ostringstream row;
        row.precision(10);
        row << epoch_offset + epoch << ',' << i << ',' << value << ',' << lr
            << ',' << norm << '\n';
        *log << row.str();
      }
    }
    double mean = loss_sum / static_cast<double>(order.size());
    if (epoch == 0) res.first_epoch_loss = mean;
    res.final_epoch_loss = mean;
    res.epochs_run = epoch + 1;
    res.updates = update;
    if (hooks.epoch_end && !hooks.epoch_end(epoch_offset + epoch, mean)) break;
  }
  return res;
}

TrainResult train(const std::string& manifest_path, ParameterStore& s,
                  const TrainConfig& cfg, const std::string& log_csv,
                  const TrainHooks& hooks) {
  std::vector<Episode> data = load_episodes(manifest_path);
  if (log_csv.empty()) return train(data, s, cfg, nullptr, hooks);
  std::ofstream out(log_csv);
  if (!out) throw IoError("cannot write training log " + log_csv);
  out << "epoch,episode,loss,lr,grad_norm\n";
  return train(data, s, cfg, &out, hooks);
}

ClassifierResult train_classifier(const std::vector<Episode>& data,
                                  ParameterStore& s, const TrainConfig& cfg,
                                  std::ostream* log) {
  cfg.validate();
  if (data.empty()) throw Error("classifier training needs episodes");
  if (s.names("classifier").empty())
    throw Error("parameter store has no classifier head");
  int64_t total = static_cast<int64_t>(cfg.epochs) * data.size();
  ClassifierResult res;
  std::vector<int> order(data.size());
  Tape tape;
  int64_t update = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::child(cfg.seed, static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    for (size_t i = 0; i < order.size(); ++i) {
      const Episode& ep = data[order[i]];
      tape.reset();
      FormulaGraph g = build_graph(ep.formula);
      EmbeddingState st = embed_formula(tape, s, g, cfg.rounds);
      Matrix label(1, 1);
      label(0, 0) = ep.sat ? 1.0 : 0.0;
      Var loss = bce_logits_mean(tape, classify_logit(tape, s, st), label);
      tape.backward(loss);
      // The base stays frozen: only head gradients reach the optimizer.
      GradMap grads;
      for (auto& [name, g_mat] : tape.param_grads())
        if (name.rfind("classifier/", 0) == 0) grads[name] = std::move(g_mat);
      double norm = clip_gradients(grads, cfg.clip_norm);
      double lr = lr_schedule(cfg.lr0, update, total - 1);
      s.adam_step(grads, lr);
      ++update;
      double value = tape.val(loss)(0, 0);
      loss_sum += value;
      if (log) {
        std::ostringstream row;
        row.precision(10);
        row << epoch << ',' << i << ',' << value << ',' << lr << ',' << norm
            << '\n';
        *log << row.str();
      }
    }
    res.final_loss = loss_sum / static_cast<double>(order.size());
    res.epochs_run = epoch + 1;
    res.updates = update;
  }
  int correct = 0;
  for (const Episode& ep : data) {
    tape.reset();
    FormulaGraph g = build_graph(ep.formula);
    EmbeddingState st = embed_formula(tape, s, g, cfg.rounds);
    if ((classify_satisfiability(tape, s, st) > 0.5) == ep.sat) ++correct;
  }
  res.accuracy = static_cast<double>(correct) / data.size();
  return res;
}

// ---- bootstrapped proof shortening ------------------------------------------

ReductionStats reduction_stats(const std::vector<ManifestRecord>& records) {
  ReductionStats st;
  int64_t orig_total = 0, cur_total = 0;
  int reduced = 0;
  double depth_sum = 0, pct_sum = 0;
  for (const ManifestRecord& rec : records) {
    if (rec.verdict != "unsat") continue;
    st.records += 1;
    orig_total += rec.orig_proof_len;
    cur_total += rec.proof_len;
    if (rec.reduction_depth > 0) {
      reduced += 1;
      st.max_depth = std::max(st.max_depth, rec.reduction_depth);
      depth_sum += rec.reduction_depth;
      double pct = rec.orig_proof_len > 0
                       ? 100.0 * (rec.orig_proof_len - rec.proof_len) /
                             rec.orig_proof_len
                       : 0.0;
      st.max_reduction_pct = std::max(st.max_reduction_pct, pct);
      pct_sum += pct;
    }
  }
  if (reduced > 0) {
    st.avg_depth = depth_sum / reduced;
    st.avg_reduction_pct = pct_sum / reduced;
  }
  if (st.records > 0) st.proofs_reduced_pct = 100.0 * reduced / st.records;
  if (orig_total > 0)
    st.total_reduction_pct =
        100.0 * static_cast<double>(orig_total - cur_total) / orig_total;
  st.total_steps = cur_total;
  return st;
}

bool install_shorter_proof(ManifestRecord& rec, const std::string& dir,
                           const CnfFormula& f,
                           const ResolutionProof& candidate) {
  if (candidate.length() >= rec.proof_len) return false;
  CheckReport report = check_proof(f, candidate);
  if (!report.valid)
    throw Error("replacement proof for '" + rec.id +
                "' failed validation: " + report.reason);
  write_file(dir + "/" + rec.certificate, emit_trace(candidate, f));
  rec.proof_len = candidate.length();
  rec.reduction_depth += 1;
  return true;
}

namespace {

// Pure greedy roll: the model picks one valid pair per step until the empty
// clause appears or max_steps derivations have been spent. Returns the raw
// derivation on success and nothing on a cap or saturation stop.
std::optional<ResolutionProof> roll_proof(const ParameterStore& s,
                                          const TrainConfig& cfg,
                                          const CnfFormula& input,
                                          int max_steps) {
  Tape tape;
  CnfFormula f = input;
  FormulaGraph g = build_graph(f);
  EmbeddingState st = embed_formula(tape, s, g, cfg.rounds);
  ResolutionProof proof;
  for (int i = 0; i < max_steps; ++i) {
    PairMask mask = valid_pair_mask(f);
    if (!mask.any_valid) return std::nullopt;
    SelectorOutput out = select_pair(tape, s, cfg.variant, f, st, mask);
    ResolutionStep step =
        oriented_step(f, out.choice.c1, out.choice.c2, out.choice.pivot);
    step.id = f.append_derived(step.resolvent);
    g.append_clause(f.clause(step.id));
    proof.steps.push_back(step);
    if (step.resolvent.empty()) return proof;
    st = integrate_derived(tape, s, g, st, cfg.mode);
  }
  return std::nullopt;
}

}  // namespace

ReductionStats bootstrap_pass(const std::string& manifest_path,
                              const ParameterStore& s,
                              const TrainConfig& cfg) {
  cfg.validate();
  std::vector<ManifestRecord> records = read_manifest(manifest_path);
  std::string dir = manifest_dir(manifest_path);
  int replaced = 0;
  for (ManifestRecord& rec : records) {
    if (rec.verdict != "unsat") continue;
    CnfFormula f = parse_dimacs(read_file(dir + "/" + rec.cnf));
    ResolutionProof stored =
        parse_trace(read_file(dir + "/" + rec.certificate));
    if (stored.length() != rec.proof_len)
      throw Error("manifest length for '" + rec.id +
                  "' disagrees with its stored trace");
    std::optional<ResolutionProof> rolled =
        roll_proof(s, cfg, f, 4 * rec.proof_len);
    if (!rolled) continue;
    ResolutionProof pruned = prune_proof_dag(f, *rolled);
    if (install_shorter_proof(rec, dir, f, pruned)) ++replaced;
  }
  write_manifest(manifest_path, records);
  ReductionStats stats = reduction_stats(records);
  stats.reduced_this_pass = replaced;
  return stats;
}

void write_reduction_csv(const std::string& path,
                         const std::vector<ReductionStats>& series) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write reduction stats " + path);
  out << "pass,records,reduced_this_pass,max_depth,avg_depth,"
         "max_reduction_pct,avg_reduction_pct,proofs_reduced_pct,"
         "total_reduction_pct,total_steps\n";
  out.precision(10);
  for (size_t i = 0; i < series.size(); ++i) {
    const ReductionStats& st = series[i];
    out << i + 1 << ',' << st.records << ',' << st.reduced_this_pass << ','
        << st.max_depth << ',' << st.avg_depth << ',' << st.max_reduction_pct
        << ',' << st.avg_reduction_pct << ',' << st.proofs_reduced_pct << ','
        << st.total_reduction_pct << ',' << st.total_steps << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<ReductionStats> bootstrap_train(const std::string& manifest_path,
                                            ParameterStore& s,
                                            const TrainConfig& cfg, int passes,
                                            const std::string& train_log_csv,
                                            const std::string& stats_csv) {
  cfg.validate();
  if (passes < 1) throw Error("bootstrapping needs at least one pass");
  std::ofstream log;
  if (!train_log_csv.empty()) {
    log.open(train_log_csv);
    if (!log) throw IoError("cannot write training log " + train_log_csv);
    log << "epoch,episode,loss,lr,grad_norm\n";
  }
  std::vector<ReductionStats> series;
  for (int pass = 0; pass < passes; ++pass) {
    // Reload so each segment trains on the latest (possibly shortened)
    // certificates.
    std::vector<Episode> data = load_episodes(manifest_path);
    train(data, s, cfg, log.is_open() ? &log : nullptr, {},
          pass * cfg.epochs);
    series.push_back(bootstrap_pass(manifest_path, s, cfg));
  }
  if (!stats_csv.empty()) write_reduction_csv(stats_csv, series);
  return series;
}

}  // namespace resolv
