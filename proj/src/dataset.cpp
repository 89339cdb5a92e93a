#include "resolv/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "resolv/io.hpp"

namespace resolv {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

Clause sample_clause(int n, const SrConfig& cfg, Rng& rng) {
  int k = 1 + (rng.bernoulli(cfg.p_bernoulli) ? 1 : 0) +
          rng.geometric0(cfg.p_geometric);
  k = std::min(k, n);
  std::vector<int> lits = rng.sample_distinct(n, k);
  for (int& l : lits)
    if (rng.bernoulli(0.5)) l = -l;
  return Clause(std::move(lits));
}

SrPair generate_sr_pair(const SrConfig& cfg, Rng& rng) {
  SrPair pair;
  pair.n = rng.uniform_int(cfg.n_min, cfg.n_max);
  CnfFormula f;
  f.num_vars = pair.n;
  std::unordered_set<std::string> seen;
  for (;;) {
    Clause c = sample_clause(pair.n, cfg, rng);
    if (!seen.insert(c.encode()).second) continue;
    f.input_clauses.push_back(c);
    SolveResult probe = solve(f, /*log_proof=*/false, cfg.probe_limits);
    if (probe.sat) continue;

    pair.unsat = f;
    // The satisfiable twin: flip one literal of the final clause. Any model
    // of the prefix falsifies the final clause in full, so any single flip
    // is satisfied by it; try flips in random order in case a probe limit
    // interferes.
    std::vector<int> order(c.lits.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    for (int idx : order) {
      std::vector<int> flipped = c.lits;
      flipped[idx] = -flipped[idx];
      CnfFormula twin = pair.unsat;
      twin.input_clauses.back() = Clause(std::move(flipped));
      SolveResult res = solve(twin, /*log_proof=*/false, cfg.probe_limits);
      if (res.sat) {
        pair.sat = std::move(twin);
        pair.sat_assignment = std::move(res.assignment);
        return pair;
      }
    }
    throw GenerationStall("no flip of the final clause verified satisfiable");
  }
}

namespace {

std::string format_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "f%04d", index);
  return buf;
}

ordered_json record_to_json(const ManifestRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["cnf"] = r.cnf;
  j["n"] = r.n;
  j["verdict"] = r.verdict;
  j["certificate"] = r.certificate;
  j["proof_len"] = r.proof_len;
  j["orig_proof_len"] = r.orig_proof_len;
  j["reduction_depth"] = r.reduction_depth;
  if (r.decisions >= 0) {
    j["decisions"] = r.decisions;
    j["propagations"] = r.propagations;
    j["solve_ms"] = r.solve_ms;
  }
  return j;
}

ManifestRecord record_from_json(const ordered_json& j) {
  ManifestRecord r;
  r.id = j.at("id").get<std::string>();
  r.cnf = j.at("cnf").get<std::string>();
  r.n = j.at("n").get<int>();
  r.verdict = j.at("verdict").get<std::string>();
  r.certificate = j.value("certificate", std::string());
  r.proof_len = j.value("proof_len", 0);
  r.orig_proof_len = j.value("orig_proof_len", 0);
  r.reduction_depth = j.value("reduction_depth", 0);
  r.decisions = j.value("decisions", static_cast<int64_t>(-1));
  r.propagations = j.value("propagations", static_cast<int64_t>(-1));
  r.solve_ms = j.value("solve_ms", -1.0);
  return r;
}

}  // namespace

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw SyntaxError(line_no, "malformed manifest row");
    records.push_back(record_from_json(j));
  }
  return records;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestRecord>& records) {
  std::ostringstream out;
  for (const ManifestRecord& r : records)
    out << record_to_json(r).dump() << '\n';
  write_file(path, out.str());
}

std::string manifest_dir(const std::string& manifest_path) {
  fs::path dir = fs::path(manifest_path).parent_path();
  return dir.empty() ? std::string(".") : dir.string();
}

std::vector<ManifestRecord> generate_dataset(const SrConfig& cfg,
                                             const DatasetOptions& opt,
                                             const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<ManifestRecord> records;
  records.reserve(2 * opt.count);
  for (int i = 0; i < opt.count; ++i) {
    Rng rng = Rng::child(opt.seed, static_cast<uint64_t>(i));
    SrPair pair = generate_sr_pair(cfg, rng);
    SolveResult res = solve(pair.unsat, /*log_proof=*/true, opt.solve_limits);
    if (res.sat)
      throw Error("internal: unsat formula solved as sat");

    ManifestRecord uns;
    uns.id = format_id(2 * i);
    uns.cnf = uns.id + ".cnf";
    uns.n = pair.n;
    uns.verdict = "unsat";
    uns.certificate = uns.id + ".trace";
    uns.proof_len = res.proof.length();
    uns.orig_proof_len = uns.proof_len;
    write_file(out_dir + "/" + uns.cnf, emit_dimacs(pair.unsat));
    write_file(out_dir + "/" + uns.certificate,
               emit_trace(res.proof, pair.unsat));
    records.push_back(std::move(uns));

    ManifestRecord sat;
    sat.id = format_id(2 * i + 1);
    sat.cnf = sat.id + ".cnf";
    sat.n = pair.n;
    sat.verdict = "sat";
    sat.certificate = sat.id + ".assign";
    write_file(out_dir + "/" + sat.cnf, emit_dimacs(pair.sat));
    write_file(out_dir + "/" + sat.certificate,
               emit_assignment(pair.sat_assignment));
    records.push_back(std::move(sat));
  }
  write_manifest(out_dir + "/manifest.jsonl", records);
  return records;
}

BatchSummary solve_batch(const std::string& manifest_path,
                         const SolverLimits& lim) {
  std::vector<ManifestRecord> records = read_manifest(manifest_path);
  std::string dir = manifest_dir(manifest_path);
  BatchSummary summary;
  for (ManifestRecord& r : records) {
    try {
      CnfFormula f = parse_dimacs(read_file(dir + "/" + r.cnf));
      bool have_cert =
          !r.certificate.empty() && fs::exists(dir + "/" + r.certificate);
      if (have_cert && r.verdict != "unknown") {
        CheckReport rep;
        if (r.verdict == "unsat") {
          ResolutionProof p =
              parse_trace(read_file(dir + "/" + r.certificate));
          rep = check_proof(f, p);
        } else {
          Assignment a = parse_assignment(
              read_file(dir + "/" + r.certificate), f.num_vars);
          rep = check_assignment(f, a);
        }
        if (!rep.valid)
          throw Error("stored certificate invalid: " + rep.reason);
        ++summary.verified;
        continue;
      }
      SolveResult res = solve(f, /*log_proof=*/true, lim);
      if (res.sat) {
        r.verdict = "sat";
        r.certificate = r.id + ".assign";
        r.proof_len = 0;
        write_file(dir + "/" + r.certificate,
                   emit_assignment(res.assignment));
      } else {
        r.verdict = "unsat";
        r.certificate = r.id + ".trace";
        r.proof_len = res.proof.length();
        if (r.orig_proof_len == 0) r.orig_proof_len = r.proof_len;
        write_file(dir + "/" + r.certificate, emit_trace(res.proof, f));
      }
      r.decisions = res.stats.decisions;
      r.propagations = res.stats.propagations;
      r.solve_ms = res.stats.wall_ms;
      ++summary.solved;
    } catch (const std::exception& e) {
      std::cerr << "solve_batch: record " << r.id << ": " << e.what() << '\n';
      ++summary.failed;
    }
  }
  write_manifest(manifest_path, records);
  return summary;
}

}  // namespace resolv
