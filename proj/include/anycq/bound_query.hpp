#pragma once

#include <span>
#include <string>
#include <vector>

#include "anycq/kg.hpp"
#include "anycq/query.hpp"

namespace anycq {

// Reference to a query term: either a variable slot or a constant slot.
struct TermRef {
  bool is_var = false;
  int index = 0;
  friend bool operator==(const TermRef&, const TermRef&) = default;
};

struct BoundAtom {
  int relation = 0;
  TermRef arg0;
  TermRef arg1;
  bool negated = false;
};

struct BoundLiteral {
  std::vector<BoundAtom> atoms;  // one atom unless is_clause
  bool is_clause = false;
  std::vector<TermRef> terms;  // distinct terms, first-appearance order
};

// A conjunctive query resolved against a graph vocabulary. Variables are
// ordered free-first, then existential, both in declaration order; constants
// are dense slots holding entity ids. Names unknown to the graph resolve to
// fresh ids past the vocabulary (empty extensions), not errors.
struct BoundQuery {
  int num_free = 0;
  std::vector<std::string> var_names;
  std::vector<int> constants;
  std::vector<std::string> constant_names;
  std::vector<BoundLiteral> literals;

  int num_vars() const { return static_cast<int>(var_names.size()); }
  int num_exist() const { return num_vars() - num_free; }
};

BoundQuery bind(const ConjunctiveQuery& q, const KnowledgeGraph& g);

inline int term_value(const TermRef& t, std::span<const int> assignment,
                      std::span<const int> constants) {
  return t.is_var ? assignment[t.index] : constants[t.index];
}

}  // namespace anycq
