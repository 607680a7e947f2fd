#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace anycq {

struct Term {
  enum class Kind { Constant, FreeVar, ExistVar };
  Kind kind = Kind::Constant;
  std::string name;

  bool is_var() const { return kind != Kind::Constant; }
  friend bool operator==(const Term&, const Term&) = default;
};

// One conjunct: an atom r(t1, t2), its negation, or a flat disjunctive
// clause OR{ atoms }. Clause bodies hold atoms only; nesting is not part of
// the grammar.
struct Literal {
  std::string relation;
  std::vector<Term> args;
  bool negated = false;
  std::vector<Literal> clause;

  bool is_clause() const { return !clause.empty(); }
  // Distinct terms in first-appearance order (for a clause, across its body).
  std::vector<Term> terms() const;
  friend bool operator==(const Literal&, const Literal&) = default;
};

struct ConjunctiveQuery {
  std::vector<std::string> free_vars;
  std::vector<std::string> exist_vars;
  std::vector<Literal> literals;

  // Distinct constant names in first-appearance order.
  std::vector<std::string> constants() const;
  friend bool operator==(const ConjunctiveQuery&, const ConjunctiveQuery&) = default;
};

// Disjunctive normal form; all disjuncts share the same free variable list.
struct DNFQuery {
  std::vector<ConjunctiveQuery> disjuncts;

  const std::vector<std::string>& free_vars() const;
  friend bool operator==(const DNFQuery&, const DNFQuery&) = default;
};

// Grammar:
//   Q(x1,...,xk) := D | D | ...
//   D   := [EXISTS y1,...,ym .] lit & lit & ...
//   lit := [!]rel(t, t)  |  OR{ lit ; lit ; ... }
//   t   := variable | c:<entity>
// Raises ParseError (with line/column) on malformed input, unbound or
// redeclared variables, wrong arity, empty conjunctions, or declared
// variables that no literal mentions.
DNFQuery parse_query(const std::string& text);

std::string print_query(const DNFQuery& q);
std::string print_query(const ConjunctiveQuery& q);

// Substitute entities for the free variables (positionally).
ConjunctiveQuery ground(const ConjunctiveQuery& q, const std::vector<std::string>& entities);
DNFQuery ground(const DNFQuery& q, const std::vector<std::string>& entities);

// Append the free variables to the existential list, preserving order, so a
// retrieval answer can be read back positionally from the tail of the
// variable block.
ConjunctiveQuery existentially_close(const ConjunctiveQuery& q);

struct QueryGraphInfo {
  int num_terms = 0;
  int num_atom_edges = 0;
  bool connected = false;
  bool tree_like = false;
};

// Undirected view: one edge per atom; clause literals merge their term set
// for connectivity only. Parallel atoms and self-loops count as cycles.
QueryGraphInfo query_graph(const ConjunctiveQuery& q);

nlohmann::json query_to_json(const ConjunctiveQuery& q);
nlohmann::json query_to_json(const DNFQuery& q);
ConjunctiveQuery conjunctive_query_from_json(const nlohmann::json& j);
DNFQuery query_from_json(const nlohmann::json& j);

}  // namespace anycq
