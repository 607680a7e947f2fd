#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "anycq/kg.hpp"
#include "anycq/query.hpp"
#include "anycq/rng.hpp"

namespace testutil {

// Random graph over entities e0..e{n-1} and relations r0..r{m-1} with
// `num_facts` distinct uniform triples.
inline anycq::KnowledgeGraph make_random_kg(int num_entities, int num_relations,
                                            int num_facts, std::uint64_t seed) {
  std::vector<std::string> entities, relations;
  for (int i = 0; i < num_entities; ++i) entities.push_back("e" + std::to_string(i));
  for (int i = 0; i < num_relations; ++i) relations.push_back("r" + std::to_string(i));
  anycq::Rng rng(seed);
  std::vector<anycq::Triple> facts;
  std::vector<anycq::Triple> seen;
  while (static_cast<int>(facts.size()) < num_facts) {
    anycq::Triple t{static_cast<int>(anycq::uniform_index(rng, num_relations)),
                    static_cast<int>(anycq::uniform_index(rng, num_entities)),
                    static_cast<int>(anycq::uniform_index(rng, num_entities))};
    if (std::find(facts.begin(), facts.end(), t) == facts.end()) facts.push_back(t);
  }
  return anycq::KnowledgeGraph::from_data(std::move(entities), std::move(relations), facts);
}

// Copy with `drop` uniformly chosen facts removed; vocabulary preserved, so
// the result is a subgraph usable as the observable half of a benchmark.
inline anycq::KnowledgeGraph drop_random_facts(const anycq::KnowledgeGraph& g, int drop,
                                               std::uint64_t seed) {
  std::vector<anycq::Triple> facts = g.facts();
  anycq::Rng rng(seed);
  for (int k = 0; k < drop && !facts.empty(); ++k) {
    const std::size_t j = anycq::uniform_index(rng, facts.size());
    facts[j] = facts.back();
    facts.pop_back();
  }
  return anycq::KnowledgeGraph::from_data(g.entity_names(), g.relation_names(), facts);
}

// Classical evaluation by exhaustive assignment enumeration, written against
// the public query/graph surface only; the reference the engine's solvers are
// tested against.
inline bool atom_holds_classical(const anycq::KnowledgeGraph& g, const anycq::Literal& lit,
                                 const std::map<std::string, int>& env) {
  const auto entity_of = [&](const anycq::Term& t) {
    if (t.kind == anycq::Term::Kind::Constant) {
      const auto id = g.entity_id(t.name);
      return id ? *id : -1;
    }
    return env.at(t.name);
  };
  const auto rid = g.relation_id(lit.relation);
  const bool present =
      rid && g.contains_fact(*rid, entity_of(lit.args[0]), entity_of(lit.args[1]));
  return lit.negated ? !present : present;
}

inline bool literal_holds_classical(const anycq::KnowledgeGraph& g, const anycq::Literal& lit,
                                    const std::map<std::string, int>& env) {
  if (!lit.is_clause()) return atom_holds_classical(g, lit, env);
  for (const anycq::Literal& a : lit.clause)
    if (atom_holds_classical(g, a, env)) return true;
  return false;
}

inline bool holds_under(const anycq::KnowledgeGraph& g, const anycq::ConjunctiveQuery& q,
                        const std::map<std::string, int>& env) {
  for (const anycq::Literal& lit : q.literals)
    if (!literal_holds_classical(g, lit, env)) return false;
  return true;
}

// All free-variable answer tuples, sorted. Enumerates |V|^(#vars) total
// assignments; callers keep instances small.
inline std::vector<std::vector<int>> brute_answers(const anycq::ConjunctiveQuery& q,
                                                   const anycq::KnowledgeGraph& g) {
  std::vector<std::string> vars = q.free_vars;
  vars.insert(vars.end(), q.exist_vars.begin(), q.exist_vars.end());
  std::vector<std::vector<int>> answers;
  std::map<std::string, int> env;
  const int n = g.num_entities();
  const auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == vars.size()) {
      if (holds_under(g, q, env)) {
        std::vector<int> tuple;
        for (const std::string& x : q.free_vars) tuple.push_back(env.at(x));
        answers.push_back(std::move(tuple));
      }
      return;
    }
    for (int e = 0; e < n; ++e) {
      env[vars[i]] = e;
      self(self, i + 1);
    }
  };
  rec(rec, 0);
  std::sort(answers.begin(), answers.end());
  answers.erase(std::unique(answers.begin(), answers.end()), answers.end());
  return answers;
}

inline bool brute_sat(const anycq::ConjunctiveQuery& q, const anycq::KnowledgeGraph& g) {
  return !brute_answers(q, g).empty();
}

inline bool brute_sat(const anycq::DNFQuery& q, const anycq::KnowledgeGraph& g) {
  for (const anycq::ConjunctiveQuery& d : q.disjuncts)
    if (brute_sat(d, g)) return true;
  return false;
}

}  // namespace testutil
