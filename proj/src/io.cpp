#include "resolv/io.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace resolv {

namespace {

// Integer tokenizer that tracks line numbers for error reporting.
struct IntLexer {
  const std::string& text;
  size_t pos = 0;
  int line = 1;

  explicit IntLexer(const std::string& t) : text(t) {}

  void skip_space() {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r' ||
            text[pos] == '\n')) {
      if (text[pos] == '\n') ++line;
      ++pos;
    }
  }

  bool eof() {
    skip_space();
    return pos >= text.size();
  }

  long next_int() {
    skip_space();
    size_t start = pos;
    if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
      ++pos;
    if (pos == start || (pos == start + 1 && !std::isdigit(static_cast<unsigned char>(text[start]))))
      throw SyntaxError(line, "expected integer");
    return std::strtol(text.c_str() + start, nullptr, 10);
  }
};

}  // namespace

CnfFormula parse_dimacs(const std::string& text) {
  std::istringstream in(text);
  std::string lit_stream;
  int num_vars = -1, num_clauses = -1;
  std::string raw_line;
  int line_no = 0;
  int header_line = 0;
  // Skipped lines still contribute a newline to lit_stream so the lexer's
  // line counter matches the original file.
  while (std::getline(in, raw_line)) {
    ++line_no;
    size_t first = raw_line.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw_line[first] == 'c') {
      lit_stream += '\n';
      continue;
    }
    if (raw_line[first] == 'p') {
      if (num_vars >= 0) throw SyntaxError(line_no, "duplicate header");
      std::istringstream hs(raw_line.substr(first + 1));
      std::string fmt;
      if (!(hs >> fmt >> num_vars >> num_clauses) || fmt != "cnf" ||
          num_vars < 0 || num_clauses < 0)
        throw SyntaxError(line_no, "malformed header, expected 'p cnf V C'");
      header_line = line_no;
      lit_stream += '\n';
      continue;
    }
    if (num_vars < 0) throw SyntaxError(line_no, "clause before header");
    lit_stream += raw_line;
    lit_stream += '\n';
  }
  if (num_vars < 0) throw SyntaxError(line_no, "missing 'p cnf' header");

  CnfFormula f;
  f.num_vars = num_vars;
  IntLexer lex(lit_stream);
  std::vector<int> cur;
  while (!lex.eof()) {
    long v = lex.next_int();
    if (v == 0) {
      f.input_clauses.emplace_back(std::move(cur));
      cur.clear();
      continue;
    }
    if (v < -num_vars || v > num_vars)
      throw VarOutOfRange("literal " + std::to_string(v) + " outside [1, " +
                          std::to_string(num_vars) + "]");
    cur.push_back(static_cast<int>(v));
  }
  if (!cur.empty()) throw SyntaxError(lex.line, "unterminated clause");
  if (f.num_inputs() != num_clauses)
    throw SyntaxError(header_line, "header declares " +
                                       std::to_string(num_clauses) +
                                       " clauses, found " +
                                       std::to_string(f.num_inputs()));
  return f;
}

std::string emit_dimacs(const CnfFormula& f) {
  std::ostringstream out;
  out << "p cnf " << f.num_vars << ' ' << f.num_inputs() << '\n';
  for (const Clause& c : f.input_clauses) {
    for (int l : c.lits) out << l << ' ';
    out << "0\n";
  }
  return out.str();
}

namespace {

struct TraceLine {
  long id;
  std::vector<int> lits;
  std::vector<long> parents;
  int line_no;
};

// Lowest variable resolvable between two clauses, 0 if none.
int lowest_pivot(const Clause& a, const Clause& b) {
  std::vector<int> p = resolvable_pivots(a, b);
  return p.empty() ? 0 : p.front();
}

}  // namespace

ResolutionProof parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string raw_line;
  int line_no = 0;
  std::vector<TraceLine> lines;
  while (std::getline(in, raw_line)) {
    ++line_no;
    size_t first = raw_line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (raw_line[first] == 'c') continue;
    IntLexer lex(raw_line);
    lex.line = line_no;
    TraceLine tl;
    tl.line_no = line_no;
    tl.id = lex.next_int();
    if (tl.id <= 0) throw SyntaxError(line_no, "clause id must be positive");
    long v;
    while ((v = lex.next_int()) != 0) tl.lits.push_back(static_cast<int>(v));
    while (!lex.eof() && (v = lex.next_int()) != 0) tl.parents.push_back(v);
    lines.push_back(std::move(tl));
  }

  // Inputs are the leading parentless lines; they define pool ids 1..n.
  size_t n = 0;
  while (n < lines.size() && lines[n].parents.empty()) ++n;
  std::unordered_map<long, int> pool_id;     // trace id -> pool id
  std::vector<Clause> pool;                  // contents by pool id - 1
  pool.reserve(lines.size());
  for (size_t i = 0; i < n; ++i) {
    if (pool_id.count(lines[i].id))
      throw SyntaxError(lines[i].line_no, "duplicate clause id");
    pool.emplace_back(lines[i].lits);
    pool_id[lines[i].id] = static_cast<int>(pool.size());
  }

  ResolutionProof proof;
  auto add_step = [&](int pa, int pb, int pivot, Clause resolvent) {
    // Orient so the pivot is positive in parent_a, as steps require.
    if (pivot > 0 && pool[pa - 1].contains(-pivot)) std::swap(pa, pb);
    pool.push_back(resolvent);
    int id = static_cast<int>(pool.size());
    proof.steps.push_back({id, pa, pb, pivot, std::move(resolvent)});
    return id;
  };

  for (size_t i = n; i < lines.size(); ++i) {
    const TraceLine& tl = lines[i];
    if (tl.parents.empty())
      throw SyntaxError(tl.line_no, "input clause after derivation steps");
    if (tl.parents.size() == 1)
      throw SyntaxError(tl.line_no, "unary derivation step");
    if (pool_id.count(tl.id))
      throw SyntaxError(tl.line_no, "duplicate clause id");
    std::vector<int> ps;
    for (long p : tl.parents) {
      auto it = pool_id.find(p);
      if (it == pool_id.end())
        throw DanglingParent(tl.line_no,
                             "parent " + std::to_string(p) + " undefined");
      ps.push_back(it->second);
    }
    Clause stated(tl.lits);
    if (ps.size() == 2) {
      // Stated literals are trusted; invalid steps surface in check_proof.
      int pivot = lowest_pivot(pool[ps[0] - 1], pool[ps[1] - 1]);
      pool_id[tl.id] = add_step(ps[0], ps[1], pivot, std::move(stated));
    } else {
      // Chain: resolve left to right; the final link takes the stated
      // literals so content disagreements are the checker's to report.
      int cur = ps[0];
      for (size_t j = 1; j < ps.size(); ++j) {
        const Clause& ca = pool[cur - 1];
        const Clause& cb = pool[ps[j] - 1];
        int pivot = lowest_pivot(ca, cb);
        if (pivot == 0)
          throw SyntaxError(tl.line_no, "chain link is not resolvable");
        Clause next = (j + 1 < ps.size()) ? resolve(ca, cb, pivot) : stated;
        cur = add_step(cur, ps[j], pivot, std::move(next));
      }
      pool_id[tl.id] = cur;
    }
  }
  return proof;
}

std::string emit_trace(const ResolutionProof& p, const CnfFormula& f) {
  std::ostringstream out;
  for (int i = 0; i < f.num_inputs(); ++i) {
    out << (i + 1) << ' ';
    for (int l : f.input_clauses[i].lits) out << l << ' ';
    out << "0 0\n";
  }
  for (const ResolutionStep& s : p.steps) {
    out << s.id << ' ';
    for (int l : s.resolvent.lits) out << l << ' ';
    out << "0 " << s.parent_a << ' ' << s.parent_b << " 0\n";
  }
  return out.str();
}

Assignment parse_assignment(const std::string& text, int num_vars) {
  Assignment a(num_vars);
  std::istringstream in(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    size_t first = raw_line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (raw_line[first] != 'v')
      throw SyntaxError(line_no, "expected 'v<id> 0|1'");
    std::istringstream ls(raw_line.substr(first + 1));
    int var, value;
    if (!(ls >> var >> value) || (value != 0 && value != 1))
      throw SyntaxError(line_no, "expected 'v<id> 0|1'");
    if (var < 1 || var > num_vars)
      throw VarOutOfRange("assignment variable " + std::to_string(var) +
                          " outside [1, " + std::to_string(num_vars) + "]");
    if (a.assigned(var)) throw SyntaxError(line_no, "duplicate variable");
    a.set(var, value == 1);
  }
  return a;
}

std::string emit_assignment(const Assignment& a) {
  std::ostringstream out;
  for (int v = 1; v <= a.num_vars(); ++v)
    if (a.assigned(v)) out << 'v' << v << ' ' << (a.value(v) ? 1 : 0) << '\n';
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace resolv
