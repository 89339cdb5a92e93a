#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resolv/cnf.hpp"
#include "resolv/rng.hpp"
#include "resolv/teacher.hpp"

namespace resolv {

// Distribution parameters for paired formula generation. A pair is built by
// appending random clauses to an empty formula until it turns unsatisfiable;
// the satisfiable twin is the same formula with one uniformly chosen literal
// of the final clause flipped.
struct SrConfig {
  int n_min = 10;
  int n_max = 40;
  double p_bernoulli = 0.7;   // clause size: 1 + Bernoulli + Geometric
  double p_geometric = 0.4;
  SolverLimits probe_limits;  // per satisfiability probe; 0 = unlimited
};

// One random clause over [1, n]: k = 1 + Bernoulli(p_b) + Geometric(p_g)
// clamped to n, k distinct variables chosen uniformly, each negated with
// probability 1/2. Mean size before clamping is 1 + p_b + (1-p_g)/p_g.
Clause sample_clause(int n, const SrConfig& cfg, Rng& rng);

struct SrPair {
  int n = 0;
  CnfFormula unsat;
  CnfFormula sat;             // differs from `unsat` in one literal of the last clause
  Assignment sat_assignment;  // model found by the verifying probe
};

// Deterministic for a given rng state. Clauses that exactly duplicate an
// existing clause are resampled rather than appended. Throws GenerationStall
// if no flip of the final clause yields a satisfiable twin (unreachable in
// theory: any model of the prefix falsifies the final clause, so flipping
// any literal satisfies it; the guard covers probe resource limits).
SrPair generate_sr_pair(const SrConfig& cfg, Rng& rng);

// One dataset row per formula. Paths are relative to the manifest's
// directory. proof_len tracks the current certificate, orig_proof_len the
// teacher's original; they diverge once bootstrapping rewrites proofs.
struct ManifestRecord {
  std::string id;
  std::string cnf;
  int n = 0;
  std::string verdict;  // "sat" | "unsat" | "unknown"
  std::string certificate;
  int proof_len = 0;
  int orig_proof_len = 0;
  int reduction_depth = 0;
  // Solver statistics, present (>= 0) once the teacher has run.
  int64_t decisions = -1;
  int64_t propagations = -1;
  double solve_ms = -1;
};

std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path,
                    const std::vector<ManifestRecord>& records);
std::string manifest_dir(const std::string& manifest_path);

struct DatasetOptions {
  uint64_t seed = 0;
  int count = 0;              // number of pairs; 2*count formulas
  SolverLimits solve_limits;  // for certificate generation
};

// Generates `count` pairs into out_dir as fXXXX.cnf plus fXXXX.trace /
// fXXXX.assign certificates and writes manifest.jsonl. Pair i derives its
// randomness from (seed, i) only, so outputs are byte-identical across runs.
// Unsat formulas take even indices, their sat twins the following odd index.
std::vector<ManifestRecord> generate_dataset(const SrConfig& cfg,
                                             const DatasetOptions& opt,
                                             const std::string& out_dir);

struct BatchSummary {
  int solved = 0;    // certificates produced by this run
  int verified = 0;  // existing certificates that checked out
  int failed = 0;    // records skipped after an error (logged to stderr)
};

// Solves every record lacking a certificate and verifies the rest, updating
// the manifest in place. Idempotent: existing certificates are never
// rewritten. Per-record errors are logged and the batch continues.
BatchSummary solve_batch(const std::string& manifest_path,
                         const SolverLimits& lim);

}  // namespace resolv
