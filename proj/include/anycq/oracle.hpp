#pragma once

#include <cstdint>
#include <vector>

#include "anycq/bound_query.hpp"
#include "anycq/kg.hpp"
#include "anycq/query.hpp"

namespace anycq {

enum class OracleMode { Boolean, FirstAnswer, AllAnswers };

struct OracleConfig {
  OracleMode mode = OracleMode::AllAnswers;
  double timeout_sec = 0.0;   // <= 0 disables
  std::uint64_t max_nodes = 0;  // 0 disables; trips the timed_out flag
  // Optional prefix restriction: only free-variable assignments extending one
  // of these tuples (matched positionally) are explored. Sound for arity
  // lifting because every lifted answer projects onto a base answer.
  std::vector<std::vector<int>> seed_answers;
};

struct OracleResult {
  bool satisfiable = false;
  std::vector<std::vector<int>> answers;  // free-variable tuples, sorted
  // True when the verdict (and, in all-answers mode, the answer set) is
  // definitive: only a timeout or node-budget truncation clears it.
  bool exhausted = false;
  bool timed_out = false;  // also set when max_nodes trips
  std::uint64_t nodes = 0;
  double wall_time_sec = 0.0;
};

// Classical evaluation by backtracking join. Free variables are enumerated
// before existential ones; within each group the variable with the fewest
// remaining candidates goes first (lowest index on ties). Negated literals
// act as filters once ground; a variable occurring only under negation is
// unsafe and raises DataError.
OracleResult oracle_solve(const BoundQuery& q, const KnowledgeGraph& g,
                          const OracleConfig& cfg = {});
OracleResult oracle_solve(const ConjunctiveQuery& q, const KnowledgeGraph& g,
                          const OracleConfig& cfg = {});

// True iff some disjunct grounded with `tuple` is classically satisfiable.
// Timeouts count as not verified.
bool oracle_verifies(const DNFQuery& q, const std::vector<std::string>& tuple,
                     const KnowledgeGraph& g, double timeout_sec = 0.0);

}  // namespace anycq
