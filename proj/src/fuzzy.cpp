#include "anycq/fuzzy.hpp"

#include <algorithm>

#include "anycq/errors.hpp"

namespace anycq {

double atom_score(const LinkPredictor& pi, const BoundAtom& atom,
                  std::span<const int> assignment, std::span<const int> constants) {
  int a = term_value(atom.arg0, assignment, constants);
  int b = term_value(atom.arg1, assignment, constants);
  double s = pi.score(atom.relation, a, b);
  return atom.negated ? 1.0 - s : s;
}

double literal_score(const LinkPredictor& pi, const BoundLiteral& lit,
                     std::span<const int> assignment, std::span<const int> constants) {
  if (!lit.is_clause) return atom_score(pi, lit.atoms[0], assignment, constants);
  double best = 0.0;
  for (const BoundAtom& a : lit.atoms)
    best = std::max(best, atom_score(pi, a, assignment, constants));
  return best;
}

double assignment_score(const LinkPredictor& pi, const BoundQuery& q,
                        std::span<const int> assignment) {
  double worst = 1.0;
  for (const BoundLiteral& lit : q.literals) {
    worst = std::min(worst, literal_score(pi, lit, assignment, q.constants));
    if (worst == 0.0) break;
  }
  return worst;
}

ExhaustiveResult boolean_score_exhaustive(const LinkPredictor& pi, const BoundQuery& q,
                                          int num_entities, std::uint64_t budget) {
  if (q.num_free != 0) throw DataError("exhaustive scoring expects a Boolean query");
  const int k = q.num_vars();
  if (k > 0 && num_entities <= 0) throw DataError("empty entity domain");

  std::uint64_t total = 1;
  for (int i = 0; i < k; ++i) {
    if (total > budget / std::max(num_entities, 1) + 1) throw DataError("exhaustive budget exceeded");
    total *= static_cast<std::uint64_t>(num_entities);
  }
  if (total > budget) throw DataError("exhaustive budget exceeded");

  ExhaustiveResult res;
  std::vector<int> assignment(k, 0);
  res.best_assignment = assignment;
  res.score = -1.0;
  while (true) {
    ++res.visited;
    double s = assignment_score(pi, q, assignment);
    if (s > res.score) {
      res.score = s;
      res.best_assignment = assignment;
    }
    int i = k - 1;
    while (i >= 0 && assignment[i] == num_entities - 1) assignment[i--] = 0;
    if (i < 0) break;
    ++assignment[i];
  }
  return res;
}

}  // namespace anycq
