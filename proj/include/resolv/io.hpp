#pragma once

#include <string>

#include "resolv/cnf.hpp"

namespace resolv {

// DIMACS CNF. Parsing skips "c" comment lines, requires a "p cnf V C"
// header, reads 0-terminated clauses (which may span lines), enforces the
// header's clause count, and rejects out-of-range literals. A bare "0"
// parses as the (falsum) empty clause.
CnfFormula parse_dimacs(const std::string& text);

// Canonical emission: header, then one clause per line in canonical literal
// order. emit(parse(emit(f))) == emit(f).
std::string emit_dimacs(const CnfFormula& f);

// Resolution trace, one clause per line: "<id> <lit...> 0 <parent_id...> 0".
// Input clauses carry an empty parent list. A line with three or more
// parents is a chain; it expands into binary steps eliminating pivots in
// parent order, resolving left to right, each intermediate resolvent
// receiving a fresh id. Trace ids may be sparse; parsed steps are renumbered
// consecutively after the inputs. Stated literals on binary lines are
// trusted as-is so that corrupted traces surface in check_proof rather than
// at parse time. Throws SyntaxError / DanglingParent.
ResolutionProof parse_trace(const std::string& text);

// Inverse of parse_trace for binary proofs over f's input clauses.
std::string emit_trace(const ResolutionProof& p, const CnfFormula& f);

// Assignment file: one line "v<id> 0|1" per variable, ascending.
Assignment parse_assignment(const std::string& text, int num_vars);
std::string emit_assignment(const Assignment& a);

// Whole-file helpers.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace resolv
