#include "anycq/bound_query.hpp"

#include <algorithm>
#include <unordered_map>

#include "anycq/errors.hpp"

namespace anycq {

namespace {

struct Binder {
  const KnowledgeGraph& g;
  BoundQuery& out;
  std::unordered_map<std::string, int> var_slots;
  std::unordered_map<std::string, int> const_slots;
  std::unordered_map<std::string, int> fresh_relations;
  int next_entity;
  int next_relation;

  TermRef term(const Term& t) {
    if (t.kind != Term::Kind::Constant) {
      auto it = var_slots.find(t.name);
      if (it == var_slots.end()) throw DataError("undeclared variable: " + t.name);
      return {true, it->second};
    }
    auto it = const_slots.find(t.name);
    if (it != const_slots.end()) return {false, it->second};
    int slot = static_cast<int>(out.constants.size());
    auto id = g.entity_id(t.name);
    out.constants.push_back(id ? *id : next_entity++);
    out.constant_names.push_back(t.name);
    const_slots.emplace(t.name, slot);
    return {false, slot};
  }

  int relation(const std::string& name) {
    auto id = g.relation_id(name);
    if (id) return *id;
    auto [it, inserted] = fresh_relations.try_emplace(name, next_relation);
    if (inserted) ++next_relation;
    return it->second;
  }

  BoundAtom atom(const Literal& lit) {
    BoundAtom a;
    a.relation = relation(lit.relation);
    a.arg0 = term(lit.args[0]);
    a.arg1 = term(lit.args[1]);
    a.negated = lit.negated;
    return a;
  }
};

void collect_terms(BoundLiteral& lit) {
  for (const BoundAtom& a : lit.atoms) {
    for (const TermRef& t : {a.arg0, a.arg1}) {
      if (std::find(lit.terms.begin(), lit.terms.end(), t) == lit.terms.end())
        lit.terms.push_back(t);
    }
  }
}

}  // namespace

BoundQuery bind(const ConjunctiveQuery& q, const KnowledgeGraph& g) {
  BoundQuery out;
  out.num_free = static_cast<int>(q.free_vars.size());
  out.var_names = q.free_vars;
  out.var_names.insert(out.var_names.end(), q.exist_vars.begin(), q.exist_vars.end());

  Binder b{g, out, {}, {}, {}, g.num_entities(), g.num_relations()};
  for (int i = 0; i < static_cast<int>(out.var_names.size()); ++i)
    b.var_slots.emplace(out.var_names[i], i);

  for (const Literal& lit : q.literals) {
    BoundLiteral bl;
    if (lit.is_clause()) {
      bl.is_clause = true;
      for (const Literal& a : lit.clause) bl.atoms.push_back(b.atom(a));
    } else {
      bl.atoms.push_back(b.atom(lit));
    }
    collect_terms(bl);
    out.literals.push_back(std::move(bl));
  }
  if (out.literals.empty()) throw DataError("cannot bind an empty conjunction");
  return out;
}

}  // namespace anycq
