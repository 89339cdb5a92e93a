#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "resolv/io.hpp"
#include "resolv/training.hpp"

using namespace resolv;
using oracle::C;
using oracle::F;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

TrainConfig desk_cfg(int d, Variant v = Variant::kFull,
                     EmbedMode m = EmbedMode::kDynamic) {
  TrainConfig cfg;
  cfg.d = d;
  cfg.rounds = 3;
  cfg.epochs = 10;
  cfg.lr0 = 1e-3;
  cfg.variant = v;
  cfg.mode = m;
  return cfg;
}

ParameterStore full_model(int d, uint64_t seed,
                          Variant v = Variant::kFull) {
  Rng rng(seed);
  ParameterStore s;
  embedder_define(s, d, rng);
  selector_define(s, v, d, rng);
  decoder_define(s, d, rng);
  return s;
}

ResolutionStep step(int id, int pa, int pb, int pivot,
                    std::vector<int> lits) {
  ResolutionStep st;
  st.id = id;
  st.parent_a = pa;
  st.parent_b = pb;
  st.pivot = pivot;
  st.resolvent = C(std::move(lits));
  return st;
}

// Chain formula over three variables with a 3-step shortest refutation:
// {2}, then {3}, then the empty clause.
CnfFormula chain_formula() {
  return F(3, {{1, 2}, {-1, 2}, {-2, 3}, {-3}});
}

ResolutionProof chain_minimal_proof() {
  ResolutionProof p;
  p.steps.push_back(step(5, 1, 2, 1, {2}));
  p.steps.push_back(step(6, 5, 3, 2, {3}));
  p.steps.push_back(step(7, 6, 4, 3, {}));
  return p;
}

// Valid 4-step refutation whose every step is an ancestor of the empty
// clause, so ancestor pruning cannot shrink it; only a different derivation
// can beat it.
ResolutionProof chain_redundant_proof() {
  ResolutionProof p;
  p.steps.push_back(step(5, 3, 4, 3, {-2}));
  p.steps.push_back(step(6, 1, 5, 2, {1}));
  p.steps.push_back(step(7, 2, 5, 2, {-1}));
  p.steps.push_back(step(8, 6, 7, 1, {}));
  return p;
}

// Two-variable formula where every greedy derivation reaches the empty
// clause within two steps: the only valid pairs at the start are
// ({1},{-1}) giving the empty clause outright and ({1},{-1,2}) giving {2},
// after which ({1},{-1}) is the sole option left. Ancestor pruning of any
// such roll keeps exactly one step, whatever the scorer's parameters.
CnfFormula forced_shortcut_formula() { return F(2, {{1}, {-1}, {-1, 2}}); }

// Stored two-step certificate for it whose first step is dead weight, so a
// shortening pass must install a strictly shorter proof on its first try.
ResolutionProof padded_unit_proof() {
  ResolutionProof p;
  p.steps.push_back(step(4, 1, 3, 1, {2}));
  p.steps.push_back(step(5, 1, 2, 1, {}));
  return p;
}

// Contradictory units plus clauses over six more variables that give an
// untrained scorer plenty of pairs to wander through.
CnfFormula distractor_formula() {
  return F(8, {{1},
               {-1},
               {2, 3},
               {-2, 4},
               {3, 5},
               {-3, 6},
               {4, 7},
               {-4, 8},
               {5, 6},
               {-5, -6},
               {7, 8},
               {-7, -8}});
}

ResolutionProof unit_conflict_proof() {
  ResolutionProof p;
  p.steps.push_back(step(13, 1, 2, 1, {}));
  return p;
}

ManifestRecord write_unsat_record(const TempDir& dir, const std::string& id,
                                  const CnfFormula& f,
                                  const ResolutionProof& p) {
  REQUIRE(check_proof(f, p).valid);
  write_file(dir.file(id + ".cnf"), emit_dimacs(f));
  write_file(dir.file(id + ".trace"), emit_trace(p, f));
  ManifestRecord rec;
  rec.id = id;
  rec.cnf = id + ".cnf";
  rec.n = f.num_vars;
  rec.verdict = "unsat";
  rec.certificate = id + ".trace";
  rec.proof_len = p.length();
  rec.orig_proof_len = p.length();
  return rec;
}

Episode unsat_episode(const CnfFormula& f, const ResolutionProof& p,
                      const std::string& id = "u") {
  Episode ep;
  ep.id = id;
  ep.formula = f;
  ep.proof = p;
  return ep;
}

Episode sat_episode(const CnfFormula& f, const Assignment& a,
                    const std::string& id = "s") {
  Episode ep;
  ep.id = id;
  ep.sat = true;
  ep.formula = f;
  ep.assignment = a;
  return ep;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace

// ---- losses ---------------------------------------------------------------

TEST_CASE("proof loss matches hand arithmetic") {
  // A single certain step costs nothing.
  CHECK(resolution_loss({std::log(1.0)}, 0.99) == 0.0);

  // Two coin-flip steps at discount 0.99: (ln 2) * (0.99 + 1) / 2.
  double two_flips = resolution_loss({std::log(0.5), std::log(0.5)}, 0.99);
  CHECK(two_flips == doctest::Approx(0.6896814446571456).epsilon(1e-6));

  // Discount one reduces to the mean negative log-likelihood.
  std::vector<double> lps = {-0.3, -1.7, -0.05, -2.2};
  double mean_nll = 0;
  for (double lp : lps) mean_nll -= lp;
  mean_nll /= static_cast<double>(lps.size());
  CHECK(resolution_loss(lps, 1.0) == doctest::Approx(mean_nll).epsilon(1e-12));

  // Only step t of T carries weight gamma^(T-t).
  CHECK(resolution_loss({std::log(0.5), 0.0, 0.0}, 0.9) ==
        doctest::Approx(std::log(2.0) * 0.81 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(resolution_loss(std::vector<double>{}, 0.99), Error);
  CHECK_THROWS_AS(resolution_loss({-1.0}, 0.0), Error);
  CHECK_THROWS_AS(resolution_loss({-1.0}, 1.01), Error);
}

TEST_CASE("proof loss tape form matches the scalar form and its gradient") {
  Rng rng(3);
  ParameterStore s;
  Matrix& lp = s.define("lp", 1, 3, rng, 0.0);
  lp << -0.2, -0.9, -0.4;

  Tape t;
  Var m = param(t, s, "lp");
  std::vector<Var> steps = {pick(t, m, 0, 0), pick(t, m, 0, 1),
                            pick(t, m, 0, 2)};
  const double gamma = 0.9;
  Var loss = resolution_loss(t, steps, gamma);
  CHECK(t.val(loss)(0, 0) ==
        doctest::Approx(resolution_loss({-0.2, -0.9, -0.4}, gamma))
            .epsilon(1e-15));

  // d loss / d lp_t = -gamma^(T-t) / T.
  t.backward(loss);
  const Matrix& g = t.grad(m);
  CHECK(g(0, 0) == doctest::Approx(-0.81 / 3.0).epsilon(1e-15));
  CHECK(g(0, 1) == doctest::Approx(-0.9 / 3.0).epsilon(1e-15));
  CHECK(g(0, 2) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));

  Tape t2;
  Var bad = t2.constant(Matrix::Zero(2, 1));
  CHECK_THROWS_AS(resolution_loss(t2, {bad}, gamma), ShapeMismatch);
}

TEST_CASE("assignment loss matches hand arithmetic") {
  // Exactly matched hard outputs cost nothing, without evaluating 0*log(0).
  CHECK(sat_loss({{1.0, 0.0}}, {1, 0}, 0.99) == 0.0);

  // One step of coin-flip outputs costs ln 2 regardless of the targets.
  CHECK(sat_loss({{0.5, 0.5}}, {1, 0}, 0.99) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));

  // Earlier steps are discounted exactly like proof steps.
  double early = sat_loss({{0.5, 0.5}, {1.0, 0.0}, {1.0, 0.0}}, {1, 0}, 0.9);
  CHECK(early == doctest::Approx(std::log(2.0) * 0.81 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(sat_loss({}, {1}, 0.99), Error);
  CHECK_THROWS_AS(sat_loss({{0.5}}, {}, 0.99), Error);
  CHECK_THROWS_AS(sat_loss({{0.5, 0.5}}, {1}, 0.99), ShapeMismatch);
  CHECK_THROWS_AS(sat_loss({{0.5}}, {1}, 1.5), Error);
}

TEST_CASE("assignment loss tape form matches the scalar form and gradient") {
  Rng rng(5);
  ParameterStore s;
  Matrix& z0 = s.define("z0", 2, 1, rng, 0.0);
  Matrix& z1 = s.define("z1", 2, 1, rng, 0.0);
  z0 << 0.7, -1.2;
  z1 << -0.4, 2.0;
  Matrix target(2, 1);
  target << 1.0, 0.0;

  const double gamma = 0.95;
  Tape t;
  Var a = param(t, s, "z0");
  Var b = param(t, s, "z1");
  Var loss = sat_loss(t, {a, b}, target, gamma);

  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  std::vector<std::vector<double>> probs = {
      {sigmoid(0.7), sigmoid(-1.2)}, {sigmoid(-0.4), sigmoid(2.0)}};
  CHECK(t.val(loss)(0, 0) ==
        doctest::Approx(sat_loss(probs, {1, 0}, gamma)).epsilon(1e-12));

  // d loss / d z_t(v) = weight_t * (sigmoid(z) - y) / (T * V).
  t.backward(loss);
  CHECK(t.grad(a)(0, 0) ==
        doctest::Approx(gamma * (sigmoid(0.7) - 1.0) / 4.0).epsilon(1e-12));
  CHECK(t.grad(b)(1, 0) ==
        doctest::Approx((sigmoid(2.0) - 0.0) / 4.0).epsilon(1e-12));
}

// ---- episodes ---------------------------------------------------------------

TEST_CASE("a forced single-event episode costs exactly zero") {
  CnfFormula f = F(1, {{1}, {-1}});
  ResolutionProof p;
  p.steps.push_back(step(3, 1, 2, 1, {}));
  Episode ep = unsat_episode(f, p);

  // The anchored head factors the step as p(anchor) * p(cell | anchor); with
  // one variable and one unordered pair both factors are forced to one.
  ParameterStore anch = full_model(8, 11, Variant::kAnchored);
  TrainConfig cfg = desk_cfg(8, Variant::kAnchored);
  Tape t;
  EpisodeStats stats;
  Var loss = episode_loss(t, anch, ep, cfg, &stats);
  CHECK(t.val(loss)(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stats.steps == 1);
  CHECK(stats.argmax_hits == 1);

  // The full grid scores the two orientations of the same pair as separate
  // events of equal content, so the forced pair costs exactly ln 2.
  ParameterStore full = full_model(8, 12, Variant::kFull);
  TrainConfig fcfg = desk_cfg(8, Variant::kFull);
  Tape t2;
  Var loss2 = episode_loss(t2, full, ep, fcfg);
  CHECK(t2.val(loss2)(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("teacher forcing replays solver certificates for every variant") {
  SrConfig gen;
  gen.n_min = 3;
  gen.n_max = 5;
  Rng rng(19);
  for (Variant v : {Variant::kCascaded, Variant::kFull, Variant::kAnchored}) {
    for (EmbedMode m : {EmbedMode::kStatic, EmbedMode::kDynamic}) {
      SrPair pair = generate_sr_pair(gen, rng);
      ResolutionProof proof = solve(pair.unsat, true).proof;
      REQUIRE(proof.length() >= 1);
      Episode ep = unsat_episode(pair.unsat, proof);

      ParameterStore s = full_model(8, 100 + static_cast<int>(v), v);
      TrainConfig cfg = desk_cfg(8, v, m);
      Tape t;
      EpisodeStats stats;
      Var loss = episode_loss(t, s, ep, cfg, &stats);
      double value = t.val(loss)(0, 0);
      CHECK(std::isfinite(value));
      CHECK(value >= 0.0);
      CHECK(stats.steps == proof.length());
      CHECK(stats.argmax_hits <= stats.steps);
    }
  }
}

TEST_CASE("corrupted certificates surface as teacher step errors") {
  CnfFormula f = chain_formula();
  ParameterStore s = full_model(8, 14);
  TrainConfig cfg = desk_cfg(8);

  // Out-of-range parent id.
  ResolutionProof bad = chain_minimal_proof();
  bad.steps[0].parent_a = 99;
  Tape t1;
  CHECK_THROWS_AS(episode_loss(t1, s, unsat_episode(f, bad), cfg),
                  TeacherStepInvalid);

  // A clause paired with itself.
  bad = chain_minimal_proof();
  bad.steps[0].parent_a = bad.steps[0].parent_b;
  Tape t2;
  CHECK_THROWS_AS(episode_loss(t2, s, unsat_episode(f, bad), cfg),
                  TeacherStepInvalid);

  // An unresolvable pair ({1,2} with {-2,3} resolves, {1,2} with {-3} does
  // not).
  bad = chain_minimal_proof();
  bad.steps[0].parent_a = 1;
  bad.steps[0].parent_b = 4;
  Tape t3;
  CHECK_THROWS_AS(episode_loss(t3, s, unsat_episode(f, bad), cfg),
                  TeacherStepInvalid);
}

TEST_CASE("sat episodes roll greedy derivations and score the decoder") {
  SrConfig gen;
  gen.n_min = 4;
  gen.n_max = 5;
  Rng rng(23);
  SrPair pair = generate_sr_pair(gen, rng);
  Episode ep = sat_episode(pair.sat, pair.sat_assignment);

  ParameterStore s = full_model(8, 15);
  TrainConfig cfg = desk_cfg(8);
  cfg.sat_step_cap = 3;
  Tape t;
  EpisodeStats stats;
  Var loss = episode_loss(t, s, ep, cfg, &stats);
  CHECK(std::isfinite(t.val(loss)(0, 0)));
  CHECK(t.val(loss)(0, 0) > 0.0);
  CHECK(stats.steps >= 1);
  CHECK(stats.steps <= 3);
  CHECK(stats.argmax_hits == 0);

  // A pool admitting no derivation at all still gets one decoder score.
  Assignment both(2);
  both.set(1, true);
  both.set(2, true);
  Episode units = sat_episode(F(2, {{1}, {2}}), both);
  Tape t2;
  EpisodeStats stats2;
  Var loss2 = episode_loss(t2, s, units, cfg, &stats2);
  CHECK(stats2.steps == 1);
  CHECK(std::isfinite(t2.val(loss2)(0, 0)));
}

TEST_CASE("episode losses differentiate correctly end to end") {
  SrConfig gen;
  gen.n_min = 5;
  gen.n_max = 5;
  Rng rng(7);
  SrPair pair = generate_sr_pair(gen, rng);
  ResolutionProof proof = solve(pair.unsat, true).proof;
  Episode unsat_ep = unsat_episode(pair.unsat, proof);
  Episode sat_ep = sat_episode(pair.sat, pair.sat_assignment);

  ParameterStore s = full_model(8, 21);
  TrainConfig cfg = desk_cfg(8);
  auto unsat_loss = [&](Tape& t) { return episode_loss(t, s, unsat_ep, cfg); };
  oracle::FdAudit rep = oracle::fd_gradient_audit(s, unsat_loss, 10, 117);
  CAPTURE(rep.worst);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.checked > 0);
  CHECK(rep.max_rel_err < 1e-4);

  // Static integration exercises the other embedding-update path.
  ParameterStore s2 = full_model(8, 22);
  TrainConfig cfg2 = desk_cfg(8, Variant::kFull, EmbedMode::kStatic);
  auto static_loss = [&](Tape& t) {
    return episode_loss(t, s2, unsat_ep, cfg2);
  };
  oracle::FdAudit rep2 = oracle::fd_gradient_audit(s2, static_loss, 8, 118);
  CAPTURE(rep2.worst);
  CAPTURE(rep2.max_rel_err);
  CHECK(rep2.checked > 0);
  CHECK(rep2.max_rel_err < 1e-4);

  // The sat branch takes hard greedy steps; the loss is differentiable
  // within the region where those choices are stable, which holds for this
  // seed at the audit's step sizes.
  ParameterStore s3 = full_model(8, 23);
  TrainConfig cfg3 = desk_cfg(8);
  cfg3.sat_step_cap = 2;
  auto sat_branch_loss = [&](Tape& t) {
    return episode_loss(t, s3, sat_ep, cfg3);
  };
  oracle::FdAudit rep3 = oracle::fd_gradient_audit(s3, sat_branch_loss, 8, 119);
  CAPTURE(rep3.worst);
  CAPTURE(rep3.max_rel_err);
  CHECK(rep3.checked > 0);
  CHECK(rep3.max_rel_err < 1e-4);
}

TEST_CASE("teacher_force_episode returns the loss with its gradients") {
  Episode ep = unsat_episode(chain_formula(), chain_minimal_proof());
  ParameterStore s = full_model(8, 31);
  TrainConfig cfg = desk_cfg(8);

  EpisodeResult r1 = teacher_force_episode(s, ep, cfg);
  CHECK(r1.loss > 0.0);
  CHECK(r1.stats.steps == 3);
  CHECK(r1.grads.count("selector/W_Q") == 1);
  CHECK(r1.grads.count("embedder/cls_init") == 1);
  double norm = 0;
  for (const auto& [name, g] : r1.grads) norm += g.squaredNorm();
  CHECK(norm > 0.0);

  // Bit-identical on a rerun: episodes are pure functions of (params, data).
  EpisodeResult r2 = teacher_force_episode(s, ep, cfg);
  CHECK(r1.loss == r2.loss);
  for (const auto& [name, g] : r1.grads) {
    REQUIRE(r2.grads.count(name) == 1);
    CHECK(g == r2.grads.at(name));
  }

  // Sat episodes train the decoder through the embeddings; the selector only
  // makes hard choices, so no gradient reaches it.
  Assignment both(2);
  both.set(1, true);
  both.set(2, true);
  EpisodeResult rs =
      teacher_force_episode(s, sat_episode(F(2, {{1}, {2}}), both), cfg);
  CHECK(rs.grads.count("decoder/W0") == 1);
  CHECK(rs.grads.count("selector/W_Q") == 0);
}

TEST_CASE("config fields are validated") {
  TrainConfig cfg = desk_cfg(8);
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 1.0;
  CHECK_NOTHROW(cfg.validate());

  auto expect_invalid = [](TrainConfig c) {
    CHECK_THROWS_AS(c.validate(), Error);
  };
  TrainConfig bad = desk_cfg(8);
  bad.gamma = 0.0;
  expect_invalid(bad);
  bad = desk_cfg(8);
  bad.gamma = 1.2;
  expect_invalid(bad);
  bad = desk_cfg(8);
  bad.lr0 = 0.0;
  expect_invalid(bad);
  bad = desk_cfg(8);
  bad.epochs = 0;
  expect_invalid(bad);
  bad = desk_cfg(8);
  bad.sat_step_cap = 0;
  expect_invalid(bad);
  bad = desk_cfg(8);
  bad.rounds = 0;
  expect_invalid(bad);
}

// ---- training loop -----------------------------------------------------------

TEST_CASE("training halves the loss on a small dataset") {
  TempDir dir("resolv_train_smoke");
  SrConfig gen;
  gen.n_min = 3;
  gen.n_max = 5;
  DatasetOptions opt;
  opt.seed = 91;
  opt.count = 5;
  generate_dataset(gen, opt, dir.str());

  ParameterStore s = full_model(16, 5);
  TrainConfig cfg = desk_cfg(16);
  cfg.rounds = 4;
  cfg.epochs = 80;
  cfg.lr0 = 6e-3;
  cfg.seed = 77;

  std::string csv = dir.file("train.csv");
  TrainResult res = train(dir.file("manifest.jsonl"), s, cfg, csv);
  CHECK(res.epochs_run == 80);
  CHECK(res.updates == 800);
  CAPTURE(res.first_epoch_loss);
  CAPTURE(res.final_epoch_loss);
  CHECK(res.final_epoch_loss <= 0.5 * res.first_epoch_loss);

  // The log has one row per episode, starts at the configured rate, and the
  // planned final update annealed to exactly zero.
  std::vector<std::string> lines = read_lines(csv);
  REQUIRE(lines.size() == 801);
  CHECK(lines[0] == "epoch,episode,loss,lr,grad_norm");
  std::vector<std::string> first = split(lines[1]);
  REQUIRE(first.size() == 5);
  CHECK(first[0] == "0");
  CHECK(std::stod(first[3]) == doctest::Approx(cfg.lr0).epsilon(1e-12));
  std::vector<std::string> last = split(lines.back());
  CHECK(last[0] == "79");
  CHECK(std::stod(last[3]) == 0.0);
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> row = split(lines[i]);
    CHECK(std::isfinite(std::stod(row[2])));
    CHECK(std::isfinite(std::stod(row[4])));
  }
}

TEST_CASE("training is bit-stable across reruns") {
  std::vector<Episode> data;
  data.push_back(unsat_episode(chain_formula(), chain_minimal_proof()));
  Assignment both(2);
  both.set(1, true);
  both.set(2, false);
  data.push_back(sat_episode(F(2, {{1}, {-2}}), both));

  TrainConfig cfg = desk_cfg(8);
  cfg.epochs = 3;
  cfg.seed = 40;
  ParameterStore a = full_model(8, 41);
  ParameterStore b = full_model(8, 41);
  TrainResult ra = train(data, a, cfg);
  TrainResult rb = train(data, b, cfg);
  CHECK(ra.final_epoch_loss == rb.final_epoch_loss);
  CHECK(a.step_count() == b.step_count());
  for (const std::string& name : a.names()) {
    CAPTURE(name);
    CHECK(a.value(name) == b.value(name));
  }
}

TEST_CASE("the epoch hook can stop training early") {
  std::vector<Episode> data = {
      unsat_episode(chain_formula(), chain_minimal_proof())};
  TrainConfig cfg = desk_cfg(8);
  cfg.epochs = 10;
  ParameterStore s = full_model(8, 43);
  std::vector<int> seen;
  TrainHooks hooks;
  hooks.epoch_end = [&](int epoch, double loss) {
    CHECK(std::isfinite(loss));
    seen.push_back(epoch);
    return epoch < 1;
  };
  TrainResult res = train(data, s, cfg, nullptr, hooks);
  CHECK(res.epochs_run == 2);
  CHECK(seen == std::vector<int>{0, 1});
}

TEST_CASE("a single planned update keeps the configured rate") {
  std::vector<Episode> data = {
      unsat_episode(chain_formula(), chain_minimal_proof())};
  TrainConfig cfg = desk_cfg(8);
  cfg.epochs = 1;
  ParameterStore s = full_model(8, 44);
  std::ostringstream log;
  train(data, s, cfg, &log);
  std::vector<std::string> row = split(log.str());
  REQUIRE(row.size() == 5);
  // With one update the anneal endpoints conflict; starting wins.
  CHECK(std::stod(row[3]) == doctest::Approx(cfg.lr0).epsilon(1e-12));
}

TEST_CASE("episode gradients stay finite for 1000 consecutive updates") {
  Episode un = unsat_episode(F(1, {{1}, {-1}}), [] {
    ResolutionProof p;
    p.steps.push_back(step(3, 1, 2, 1, {}));
    return p;
  }());
  Assignment both(2);
  both.set(1, true);
  both.set(2, true);
  Episode sa = sat_episode(F(2, {{1}, {2}}), both);

  ParameterStore s = full_model(8, 47);
  TrainConfig cfg = desk_cfg(8);
  cfg.rounds = 2;
  for (int i = 0; i < 1000; ++i) {
    EpisodeResult r = teacher_force_episode(s, i % 2 ? sa : un, cfg);
    REQUIRE(std::isfinite(r.loss));
    double norm = clip_gradients(r.grads, cfg.clip_norm);
    REQUIRE(std::isfinite(norm));
    for (const auto& [name, g] : r.grads) REQUIRE(g.allFinite());
    s.adam_step(r.grads, 1e-3);
  }
  for (const std::string& name : s.names())
    REQUIRE(s.value(name).allFinite());
}

// ---- bootstrapped shortening ---------------------------------------------------

TEST_CASE("reduction accounting follows the manifest fields") {
  std::vector<ManifestRecord> records(3);
  records[0].verdict = "unsat";
  records[0].orig_proof_len = 4;
  records[0].proof_len = 2;
  records[0].reduction_depth = 1;
  records[1].verdict = "unsat";
  records[1].orig_proof_len = 1;
  records[1].proof_len = 1;
  records[2].verdict = "sat";  // ignored

  ReductionStats st = reduction_stats(records);
  CHECK(st.records == 2);
  CHECK(st.max_depth == 1);
  CHECK(st.avg_depth == doctest::Approx(1.0));
  CHECK(st.max_reduction_pct == doctest::Approx(50.0));
  CHECK(st.avg_reduction_pct == doctest::Approx(50.0));
  CHECK(st.proofs_reduced_pct == doctest::Approx(50.0));
  CHECK(st.total_reduction_pct == doctest::Approx(40.0));
  CHECK(st.total_steps == 3);

  std::vector<ManifestRecord> none;
  ReductionStats empty = reduction_stats(none);
  CHECK(empty.records == 0);
  CHECK(empty.total_reduction_pct == 0.0);
}

TEST_CASE("only strictly shorter verified proofs are installed") {
  TempDir dir("resolv_install");
  CnfFormula f = chain_formula();
  ManifestRecord rec =
      write_unsat_record(dir, "f0", f, chain_redundant_proof());
  std::string trace_before = read_file(dir.file("f0.trace"));

  // An equally long candidate is discarded untouched, valid or not.
  CHECK(!install_shorter_proof(rec, dir.str(), f, chain_redundant_proof()));
  CHECK(rec.proof_len == 4);
  CHECK(rec.reduction_depth == 0);
  CHECK(read_file(dir.file("f0.trace")) == trace_before);

  // A shorter candidate that fails replay must abort, not install: this one
  // claims the empty clause appears in a single step.
  ResolutionProof forged;
  forged.steps.push_back(step(5, 1, 2, 1, {}));
  CHECK_THROWS_AS(install_shorter_proof(rec, dir.str(), f, forged), Error);
  CHECK(rec.proof_len == 4);
  CHECK(read_file(dir.file("f0.trace")) == trace_before);

  // A shorter candidate that never reaches the empty clause is also invalid.
  ResolutionProof stub;
  stub.steps.push_back(step(5, 1, 2, 1, {2}));
  CHECK_THROWS_AS(install_shorter_proof(rec, dir.str(), f, stub), Error);

  // The genuine shorter proof lands: files and accounting both update.
  CHECK(install_shorter_proof(rec, dir.str(), f, chain_minimal_proof()));
  CHECK(rec.proof_len == 3);
  CHECK(rec.orig_proof_len == 4);
  CHECK(rec.reduction_depth == 1);
  ResolutionProof reread = parse_trace(read_file(dir.file("f0.trace")));
  CHECK(reread.length() == 3);
  CHECK(check_proof(f, reread).valid);
}

TEST_CASE("a shortening pass replaces what the model can beat") {
  TempDir dir("resolv_boot_pass");
  std::vector<ManifestRecord> records;
  records.push_back(
      write_unsat_record(dir, "f0", chain_formula(), chain_redundant_proof()));
  records.push_back(write_unsat_record(dir, "f1", distractor_formula(),
                                       unit_conflict_proof()));
  std::string manifest = dir.file("manifest.jsonl");
  write_manifest(manifest, records);
  std::string wander_before = read_file(dir.file("f1.trace"));

  // Teach the model the three-step refutation of the chain formula, on the
  // side, so its roll beats the four-step certificate in the manifest.
  TrainConfig cfg = desk_cfg(8);
  cfg.epochs = 60;
  cfg.lr0 = 1e-2;
  cfg.seed = 52;
  ParameterStore s = full_model(8, 31);
  std::vector<Episode> coach = {
      unsat_episode(chain_formula(), chain_minimal_proof())};
  train(coach, s, cfg);
  EpisodeResult fit = teacher_force_episode(s, coach[0], cfg);
  REQUIRE(fit.stats.argmax_hits == fit.stats.steps);

  ReductionStats st = bootstrap_pass(manifest, s, cfg);
  CHECK(st.records == 2);
  CHECK(st.reduced_this_pass == 1);
  CHECK(st.max_depth == 1);
  CHECK(st.avg_depth == doctest::Approx(1.0));
  CHECK(st.max_reduction_pct == doctest::Approx(25.0));
  CHECK(st.avg_reduction_pct == doctest::Approx(25.0));
  CHECK(st.proofs_reduced_pct == doctest::Approx(50.0));
  CHECK(st.total_reduction_pct == doctest::Approx(20.0));
  CHECK(st.total_steps == 4);

  // The rewritten certificate is valid and the manifest tracks it.
  std::vector<ManifestRecord> after = read_manifest(manifest);
  CHECK(after[0].proof_len == 3);
  CHECK(after[0].orig_proof_len == 4);
  CHECK(after[0].reduction_depth == 1);
  ResolutionProof replaced = parse_trace(read_file(dir.file("f0.trace")));
  CHECK(replaced.length() == 3);
  CHECK(check_proof(chain_formula(), replaced).valid);

  // The distractor record's roll found nothing better within its step cap
  // and was left alone.
  CHECK(after[1].proof_len == 1);
  CHECK(after[1].reduction_depth == 0);
  CHECK(read_file(dir.file("f1.trace")) == wander_before);
}

TEST_CASE("a manifest that disagrees with its trace is rejected") {
  TempDir dir("resolv_boot_mismatch");
  std::vector<ManifestRecord> records = {
      write_unsat_record(dir, "f0", chain_formula(), chain_minimal_proof())};
  records[0].proof_len = 7;  // doctored
  std::string manifest = dir.file("manifest.jsonl");
  write_manifest(manifest, records);

  ParameterStore s = full_model(8, 61);
  CHECK_THROWS_AS(bootstrap_pass(manifest, s, desk_cfg(8)), Error);
}

TEST_CASE("bootstrapped training shortens its own teacher within three passes") {
  TempDir dir("resolv_boot_train");
  std::vector<ManifestRecord> records;
  records.push_back(write_unsat_record(dir, "f0", forced_shortcut_formula(),
                                       padded_unit_proof()));
  records.push_back(write_unsat_record(dir, "f1", distractor_formula(),
                                       unit_conflict_proof()));
  std::string manifest = dir.file("manifest.jsonl");
  write_manifest(manifest, records);

  TrainConfig cfg = desk_cfg(8);
  cfg.epochs = 40;
  cfg.lr0 = 1e-2;
  cfg.seed = 71;
  ParameterStore s = full_model(8, 33);

  std::string train_csv = dir.file("train.csv");
  std::string stats_csv = dir.file("stats.csv");
  std::vector<ReductionStats> series =
      bootstrap_train(manifest, s, cfg, 3, train_csv, stats_csv);

  // The padding falls out on the first pass; nothing can shrink further, so
  // later passes hold steady and totals never climb back up.
  REQUIRE(series.size() == 3);
  CHECK(series[0].reduced_this_pass == 1);
  CHECK(series[0].total_steps == 2);
  for (size_t i = 1; i < series.size(); ++i) {
    CHECK(series[i].total_steps <= series[i - 1].total_steps);
    CHECK(series[i].reduced_this_pass == 0);
  }

  std::vector<ManifestRecord> after = read_manifest(manifest);
  CHECK(after[0].proof_len == 1);
  ResolutionProof current = parse_trace(read_file(dir.file("f0.trace")));
  CHECK(current.length() == 1);
  CHECK(check_proof(forced_shortcut_formula(), current).valid);

  std::vector<std::string> stats_lines = read_lines(stats_csv);
  REQUIRE(stats_lines.size() == 4);
  CHECK(split(stats_lines[0]).size() == 10);
  CHECK(split(stats_lines[1])[0] == "1");
  CHECK(split(stats_lines[1])[2] == "1");
  CHECK(split(stats_lines[3])[0] == "3");
  CHECK(split(stats_lines[3])[2] == "0");

  // Three segments of training land in one log: header plus
  // passes * epochs * records rows.
  std::vector<std::string> train_lines = read_lines(train_csv);
  CHECK(train_lines.size() == 1 + 3 * 40 * 2);
  CHECK(split(train_lines.back())[0] == "119");
}

TEST_CASE("the prediction head learns labels over a frozen base") {
  // Three contradictions and three satisfiable formulas, varied enough that
  // the frozen random embeddings separate them.
  std::vector<Episode> data;
  ResolutionProof contra;
  contra.steps.push_back(step(3, 1, 2, 1, {}));
  data.push_back(unsat_episode(F(1, {{1}, {-1}}), contra));
  data.push_back(unsat_episode(chain_formula(), chain_minimal_proof()));
  data.push_back(unsat_episode(forced_shortcut_formula(), padded_unit_proof()));
  Assignment a1(1);
  a1.set(1, true);
  data.push_back(sat_episode(F(1, {{1}}), a1));
  Assignment a2(2);
  a2.set(1, true);
  a2.set(2, false);
  data.push_back(sat_episode(F(2, {{1, 2}, {-2}}), a2));
  Assignment a3(3);
  a3.set(1, false);
  a3.set(2, true);
  a3.set(3, true);
  data.push_back(sat_episode(F(3, {{-1, 2}, {3}}), a3));

  Rng head_rng(62);
  ParameterStore s = full_model(8, 61);
  classifier_define(s, 8, head_rng);
  std::map<std::string, Matrix> base_before;
  for (const std::string& name : s.names())
    if (name.rfind("classifier/", 0) != 0) base_before[name] = s.value(name);

  TrainConfig cfg = desk_cfg(8);
  cfg.epochs = 300;
  cfg.lr0 = 3e-2;
  cfg.seed = 63;
  ClassifierResult res = train_classifier(data, s, cfg);

  CHECK(res.epochs_run == 300);
  CHECK(res.updates == 300 * 6);
  CAPTURE(res.final_loss);
  CAPTURE(res.accuracy);
  CHECK(res.final_loss < std::log(2.0));
  CHECK(res.accuracy == 1.0);

  // Only the head moved.
  for (const auto& [name, before] : base_before)
    CHECK(s.value(name) == before);

  ParameterStore headless = full_model(8, 61);
  CHECK_THROWS_AS(train_classifier(data, headless, cfg), Error);
  std::vector<Episode> none;
  CHECK_THROWS_AS(train_classifier(none, s, cfg), Error);
}

TEST_CASE("episodes load from manifests with usable verdicts only") {
  TempDir dir("resolv_load_ep");
  std::vector<ManifestRecord> records = {
      write_unsat_record(dir, "f0", chain_formula(), chain_minimal_proof())};
  std::string manifest = dir.file("manifest.jsonl");
  write_manifest(manifest, records);
  std::vector<Episode> eps = load_episodes(manifest);
  REQUIRE(eps.size() == 1);
  CHECK(!eps[0].sat);
  CHECK(eps[0].proof.length() == 3);
  CHECK(eps[0].formula.num_inputs() == 4);

  ManifestRecord unknown = records[0];
  unknown.id = "f9";
  unknown.verdict = "unknown";
  CHECK_THROWS_AS(load_episode(unknown, dir.str()), Error);

  ManifestRecord bare = records[0];
  bare.certificate = "";
  CHECK_THROWS_AS(load_episode(bare, dir.str()), Error);
}
