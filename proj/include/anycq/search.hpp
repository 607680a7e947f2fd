#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "anycq/bound_query.hpp"
#include "anycq/compgraph.hpp"
#include "anycq/kg.hpp"
#include "anycq/policy.hpp"
#include "anycq/predictor.hpp"
#include "anycq/query.hpp"

namespace anycq {

struct SearchConfig {
  int steps = 200;
  double timeout_sec = 60.0;  // <= 0 disables the timeout
  PEMode pe_mode = PEMode::Exact;
  std::uint64_t seed = 0;
};

struct SearchResult {
  double score = 0.0;
  std::vector<int> best_assignment;
  std::vector<double> step_scores;  // score of every visited assignment, step 0 first
  std::vector<double> step_seconds;  // duration of each sampled step
  int steps_run = 0;                 // sampled steps completed (initial assignment excluded)
  bool timed_out = false;
  double wall_time_sec = 0.0;
};

// Policy-guided search over all assignments of a Boolean query. The best
// fuzzy score of any visited assignment approximates the query score; the
// observable graph supplies the entity domain and the CWA labels.
SearchResult run_search(const PolicyParameters& params, const BoundQuery& q,
                        const KnowledgeGraph& g, const LinkPredictor& pi,
                        const SearchConfig& cfg);

// Classification: grounds each disjunct with the candidate answer and
// searches it, short-circuiting on the first score above 0.5.
bool solve_qac(const PolicyParameters& params, const DNFQuery& q,
               const std::vector<std::string>& answer, const KnowledgeGraph& g,
               const LinkPredictor& pi, const SearchConfig& cfg);

struct QarAnswer {
  bool found = false;              // false means None
  std::vector<std::string> tuple;  // entity names, one per free variable
  std::vector<int> tuple_ids;
  double score = 0.0;
  int disjunct = -1;  // best-scoring disjunct, first on ties
};

// Retrieval: searches the existential closure of each disjunct and reads the
// answer off the best assignment, or None when no disjunct exceeds 0.5.
QarAnswer solve_qar(const PolicyParameters& params, const DNFQuery& q,
                    const KnowledgeGraph& g, const LinkPredictor& pi,
                    const SearchConfig& cfg);

}  // namespace anycq
