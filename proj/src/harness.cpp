#include "resolv/harness.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "resolv/embed.hpp"
#include "resolv/graph.hpp"
#include "resolv/io.hpp"

namespace resolv {

namespace {

using ordered_json = nlohmann::ordered_json;

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kSat:
      return "sat";
    case Verdict::kUnsat:
      return "unsat";
    case Verdict::kSaturated:
      return "saturated";
    case Verdict::kTimeout:
      return "timeout";
  }
  throw Error("unknown verdict");
}

void HarnessConfig::validate() const {
  if (rounds < 1) throw Error("rounds must be at least 1");
  if (k < 1) throw Error("fan-out k must be at least 1");
  if (flat_cap < 1) throw Error("flat_cap must be at least 1");
}

Limits apply_limits(const CnfFormula& f, const HarnessConfig& cfg,
                    int teacher_len) {
  Limits lim;
  lim.max_derivations = teacher_len > 0 ? 4 * teacher_len : cfg.flat_cap;
  lim.max_sat_trials = 2 * f.num_vars;
  return lim;
}

EpisodeRun run_episode(const CnfFormula& input, const ParameterStore& s,
                       const HarnessConfig& cfg, const Limits& limits,
                       Rng& rng) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  EpisodeRun run;
  auto finish = [&](Verdict v, bool certified) {
    run.verdict = v;
    run.certified = certified;
    run.wall_ms = ms_since(t0);
    return run;
  };

  // Degenerate pools are decided symbolically before any model call: an
  // empty input clause is already a refutation (the empty proof checks),
  // and a formula with no clauses is satisfied vacuously.
  for (const Clause& c : input.input_clauses)
    if (c.empty()) return finish(Verdict::kUnsat, true);
  if (input.input_clauses.empty()) {
    run.assignment = Assignment(input.num_vars);
    return finish(Verdict::kSat, true);
  }

  CnfFormula f = input;
  FormulaGraph g = build_graph(f);
  Tape tape;
  EmbeddingState st = embed_formula(tape, s, g, cfg.rounds);
  run.model_calls = 1;

  // One decode opportunity: the positive branch, then the negative one,
  // each consuming a trial while budget remains. True means a checked model
  // is in run.assignment.
  auto decode_tracks = [&]() {
    for (Branch b : {Branch::kPositive, Branch::kNegative}) {
      if (run.sat_trials >= limits.max_sat_trials) return false;
      ++run.sat_trials;
      Assignment a = decode_assignment(tape, s, st, b);
      if (check_assignment(input, a).valid) {
        run.assignment = std::move(a);
        return true;
      }
    }
    return false;
  };

  if (decode_tracks()) return finish(Verdict::kSat, true);

  ResolutionProof raw;
  while (run.derivations < limits.max_derivations) {
    // Long episodes stay within bounded memory by exporting the embedding
    // values and restarting the tape before each call; inference keeps no
    // history, so constants suffice.
    Matrix lit_h = tape.val(st.lit_h), lit_c = tape.val(st.lit_c);
    Matrix cls_h = tape.val(st.cls_h), cls_c = tape.val(st.cls_c);
    int rounds_done = st.rounds;
    tape.reset();
    st.lit_h = tape.constant(std::move(lit_h));
    st.lit_c = tape.constant(std::move(lit_c));
    st.cls_h = tape.constant(std::move(cls_h));
    st.cls_c = tape.constant(std::move(cls_c));
    st.rounds = rounds_done;

    PairMask mask = valid_pair_mask(f);
    if (!mask.any_valid) return finish(Verdict::kSaturated, true);

    int before = f.total_clauses();
    ++run.model_calls;
    std::vector<PairChoice> picks;
    if (cfg.policy == PairPolicy::kModel) {
      int want = std::min(cfg.k, limits.max_derivations - run.derivations);
      picks = top_k_steps(tape, s, cfg.variant, f, st, want);
    } else {
      // The control arm draws one unordered valid cell uniformly; fan-out
      // is a property of the learned scores, so it takes single steps.
      std::vector<std::pair<int, int>> cells;
      for (int i = 0; i < before; ++i)
        for (int j = i + 1; j < before; ++j)
          if (mask.valid(i, j) != 0.0) cells.emplace_back(i, j);
      auto [i, j] = cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)];
      PairChoice pick;
      pick.c1 = i + 1;
      pick.c2 = j + 1;
      pick.pivot = mask.pivot[i][j];
      f.append_derived(resolve(f.clause(pick.c1), f.clause(pick.c2), pick.pivot));
      picks.push_back(pick);
    }

    bool refuted = false;
    for (size_t idx = 0; idx < picks.size(); ++idx) {
      const PairChoice& pick = picks[idx];
      ResolutionStep step = oriented_step(f, pick.c1, pick.c2, pick.pivot);
      step.id = before + 1 + static_cast<int>(idx);
      g.append_clause(f.clause(step.id));
      raw.steps.push_back(std::move(step));
      ++run.derivations;
      if (raw.steps.back().resolvent.empty()) {
        refuted = true;
        break;
      }
    }
    if (refuted) {
      run.proof = prune_proof_dag(input, raw);
      CheckReport report = check_proof(input, run.proof);
      if (!report.valid)
        throw Error("internal: a rolled refutation failed validation at step " +
                    std::to_string(report.failed_step));
      return finish(Verdict::kUnsat, true);
    }

    st = integrate_derived(tape, s, g, st, cfg.mode);
    if (decode_tracks()) return finish(Verdict::kSat, true);
  }
  return finish(Verdict::kTimeout, false);
}

EpisodeRun run_episode(const CnfFormula& f, const ParameterStore& s,
                       const HarnessConfig& cfg) {
  Rng rng(cfg.seed);
  return run_episode(f, s, cfg, apply_limits(f, cfg), rng);
}

std::string eval_report_json(const EvalReport& r) {
  ordered_json j;
  j["records"] = r.records;
  j["sat_records"] = r.sat_records;
  j["unsat_records"] = r.unsat_records;
  j["proven_sat"] = r.proven_sat;
  j["proven_unsat"] = r.proven_unsat;
  j["timeouts"] = r.timeouts;
  j["proven_sat_pct"] = r.proven_sat_pct;
  j["proven_unsat_pct"] = r.proven_unsat_pct;
  j["total_proven_pct"] = r.total_proven_pct;
  j["predicted_pct"] =
      r.predicted_pct ? ordered_json(*r.predicted_pct) : ordered_json(nullptr);
  j["mean_proof_ratio"] = r.mean_proof_ratio ? ordered_json(*r.mean_proof_ratio)
                                             : ordered_json(nullptr);
  j["mean_model_calls"] = r.mean_model_calls ? ordered_json(*r.mean_model_calls)
                                             : ordered_json(nullptr);
  j["wall_ms"] = r.wall_ms;
  return j.dump(2);
}

EvalReport evaluate(const std::string& manifest_path, const ParameterStore& s,
                    const HarnessConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  std::vector<ManifestRecord> records = read_manifest(manifest_path);
  std::string dir = manifest_dir(manifest_path);
  bool classify = !s.names("classifier").empty();

  EvalReport rep;
  double ratio_sum = 0.0, calls_sum = 0.0;
  int solved_unsat = 0, predicted_right = 0, predictable = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    const ManifestRecord& rec = records[i];
    CnfFormula f = parse_dimacs(read_file(dir + "/" + rec.cnf));
    int teacher_len = rec.verdict == "unsat" ? rec.proof_len : 0;
    Rng rng = Rng::child(cfg.seed, i);
    EpisodeRun run =
        run_episode(f, s, cfg, apply_limits(f, cfg, teacher_len), rng);

    ++rep.records;
    if (run.verdict == Verdict::kTimeout) ++rep.timeouts;
    bool proved_sat = run.verdict == Verdict::kSat ||
                      (run.verdict == Verdict::kSaturated && run.certified);
    if (rec.verdict == "sat") {
      ++rep.sat_records;
      if (proved_sat) ++rep.proven_sat;
    } else if (rec.verdict == "unsat") {
      ++rep.unsat_records;
      if (run.verdict == Verdict::kUnsat) {
        ++rep.proven_unsat;
        ++solved_unsat;
        ratio_sum += run.proof.length() / static_cast<double>(rec.proof_len);
        calls_sum += run.model_calls / static_cast<double>(rec.proof_len);
      }
    }
    if (classify && (rec.verdict == "sat" || rec.verdict == "unsat")) {
      Tape tape;
      FormulaGraph g = build_graph(f);
      EmbeddingState st = embed_formula(tape, s, g, cfg.rounds);
      bool said_sat = classify_satisfiability(tape, s, st) > 0.5;
      ++predictable;
      if (said_sat == (rec.verdict == "sat")) ++predicted_right;
    }
  }

  if (rep.sat_records > 0)
    rep.proven_sat_pct = 100.0 * rep.proven_sat / rep.sat_records;
  if (rep.unsat_records > 0)
    rep.proven_unsat_pct = 100.0 * rep.proven_unsat / rep.unsat_records;
  if (rep.records > 0)
    rep.total_proven_pct =
        100.0 * (rep.proven_sat + rep.proven_unsat) / rep.records;
  if (solved_unsat > 0) {
    rep.mean_proof_ratio = ratio_sum / solved_unsat;
    rep.mean_model_calls = calls_sum / solved_unsat;
  }
  if (predictable > 0)
    rep.predicted_pct = 100.0 * predicted_right / predictable;
  rep.wall_ms = ms_since(t0);
  return rep;
}

std::vector<CurvePoint> generalization_curve(const std::vector<int>& sizes,
                                             int count,
                                             const ParameterStore& s,
                                             const HarnessConfig& cfg) {
  cfg.validate();
  if (count < 1) throw Error("curve needs at least one formula per size");
  std::vector<CurvePoint> points;
  for (size_t si = 0; si < sizes.size(); ++si) {
    int n = sizes[si];
    if (n < 1) throw Error("curve sizes must be positive");
    SrConfig gen;
    gen.n_min = n;
    gen.n_max = n;
    // success_step[e] is the derivation count at which episode e was proven
    // satisfiable, or -1 when it never was within the trial budget.
    std::vector<int> success_step(count, -1);
    for (int e = 0; e < count; ++e) {
      Rng rng = Rng::child(cfg.seed, si * static_cast<size_t>(count) + e);
      SrPair pair = generate_sr_pair(gen, rng);
      Limits lim;
      lim.max_derivations = n;
      lim.max_sat_trials = 2 * n;
      EpisodeRun run = run_episode(pair.sat, s, cfg, lim, rng);
      bool proved = run.verdict == Verdict::kSat ||
                    (run.verdict == Verdict::kSaturated && run.certified);
      if (proved) success_step[e] = run.derivations;
    }
    for (int budget = 0; budget <= n; ++budget) {
      int hits = 0;
      for (int step : success_step)
        if (step >= 0 && step <= budget) ++hits;
      CurvePoint p;
      p.distribution = "SR(" + std::to_string(n) + ")";
      p.iterations = budget;
      p.trial_budget = std::min(2 * (budget + 1), 2 * n);
      p.success_pct = 100.0 * hits / count;
      points.push_back(std::move(p));
    }
  }
  return points;
}

void write_curve_csv(const std::string& path,
                     const std::vector<CurvePoint>& points) {
  std::ostringstream out;
  out.precision(10);
  out << "distribution,iterations,trial_budget,success_pct\n";
  for (const CurvePoint& p : points)
    out << p.distribution << ',' << p.iterations << ',' << p.trial_budget
        << ',' << p.success_pct << '\n';
  write_file(path, out.str());
}

}  // namespace resolv
