#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "anycq/bound_query.hpp"
#include "anycq/predictor.hpp"

namespace anycq {

// Goedel semantics: negation is 1-s, conjunction min, disjunction max.

double atom_score(const LinkPredictor& pi, const BoundAtom& atom,
                  std::span<const int> assignment, std::span<const int> constants);

double literal_score(const LinkPredictor& pi, const BoundLiteral& lit,
                     std::span<const int> assignment, std::span<const int> constants);

// Score of a Boolean (or grounded) query under a full variable assignment:
// min over literals.
double assignment_score(const LinkPredictor& pi, const BoundQuery& q,
                        std::span<const int> assignment);

struct ExhaustiveResult {
  double score = 0.0;
  std::vector<int> best_assignment;
  std::uint64_t visited = 0;
};

// Max over all |V|^k assignments, with the argmax. Reference oracle for the
// search engine; refuses to run past `budget` assignments.
ExhaustiveResult boolean_score_exhaustive(const LinkPredictor& pi, const BoundQuery& q,
                                          int num_entities,
                                          std::uint64_t budget = 100000000ull);

}  // namespace anycq
