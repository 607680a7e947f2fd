#include "anycq/query.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "anycq/errors.hpp"

namespace anycq {

namespace {

void append_unique(std::vector<Term>& out, const Term& t) {
  if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
}

}  // namespace

std::vector<Term> Literal::terms() const {
  std::vector<Term> out;
  if (is_clause()) {
    for (const Literal& atom : clause)
      for (const Term& t : atom.args) append_unique(out, t);
  } else {
    for (const Term& t : args) append_unique(out, t);
  }
  return out;
}

std::vector<std::string> ConjunctiveQuery::constants() const {
  std::vector<std::string> out;
  auto visit = [&](const Literal& atom) {
    for (const Term& t : atom.args)
      if (t.kind == Term::Kind::Constant &&
          std::find(out.begin(), out.end(), t.name) == out.end())
        out.push_back(t.name);
  };
  for (const Literal& lit : literals) {
    if (lit.is_clause())
      for (const Literal& atom : lit.clause) visit(atom);
    else
      visit(lit);
  }
  return out;
}

const std::vector<std::string>& DNFQuery::free_vars() const {
  static const std::vector<std::string> empty;
  return disjuncts.empty() ? empty : disjuncts.front().free_vars;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  int line = 1;
  int col = 1;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return eof() ? '\0' : text[pos]; }

  char get() {
    char c = text[pos++];
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    return c;
  }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) get();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line, col);
  }

  void expect(char c, const std::string& what) {
    skip_ws();
    if (peek() != c) fail("expected '" + std::string(1, c) + "' " + what);
    get();
  }

  bool accept(char c) {
    skip_ws();
    if (peek() != c) return false;
    get();
    return true;
  }

  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  static bool constant_char(char c) {
    if (std::isspace(static_cast<unsigned char>(c))) return false;
    switch (c) {
      case '(':
      case ')':
      case '{':
      case '}':
      case ',':
      case ';':
      case '&':
      case '|':
      case '!':
        return false;
      default:
        return c != '\0';
    }
  }

  std::string ident(const std::string& what) {
    skip_ws();
    if (eof() || !ident_char(peek()) || std::isdigit(static_cast<unsigned char>(peek())))
      fail("expected " + what);
    std::string s;
    while (!eof() && ident_char(peek())) s += get();
    return s;
  }
};

struct Scope {
  const std::vector<std::string>* free = nullptr;
  const std::vector<std::string>* exists = nullptr;

  Term resolve(Cursor& cur, const std::string& name) const {
    if (std::find(free->begin(), free->end(), name) != free->end())
      return {Term::Kind::FreeVar, name};
    if (std::find(exists->begin(), exists->end(), name) != exists->end())
      return {Term::Kind::ExistVar, name};
    cur.fail("unbound variable '" + name + "'");
  }
};

Term parse_term(Cursor& cur, const Scope& scope) {
  cur.skip_ws();
  if (cur.peek() == 'c' && cur.pos + 1 < cur.text.size() && cur.text[cur.pos + 1] == ':') {
    cur.get();
    cur.get();
    std::string name;
    while (!cur.eof() && Cursor::constant_char(cur.peek())) name += cur.get();
    if (name.empty()) cur.fail("expected entity name after 'c:'");
    return {Term::Kind::Constant, name};
  }
  std::string name = cur.ident("a term");
  return scope.resolve(cur, name);
}

Literal parse_atom(Cursor& cur, const Scope& scope) {
  Literal lit;
  cur.skip_ws();
  if (cur.accept('!')) lit.negated = true;
  lit.relation = cur.ident("a relation name");
  cur.expect('(', "after relation name");
  lit.args.push_back(parse_term(cur, scope));
  cur.expect(',', "between atom arguments");
  lit.args.push_back(parse_term(cur, scope));
  cur.skip_ws();
  if (cur.peek() == ',') cur.fail("atoms are binary: expected ')' after two arguments");
  cur.expect(')', "to close atom");
  return lit;
}

Literal parse_literal(Cursor& cur, const Scope& scope) {
  cur.skip_ws();
  // "OR" introduces a clause only when followed by '{'; otherwise it is an
  // ordinary relation name.
  if (cur.text.compare(cur.pos, 2, "OR") == 0) {
    Cursor probe = cur;
    probe.get();
    probe.get();
    probe.skip_ws();
    if (probe.peek() == '{') {
      cur.get();
      cur.get();
      cur.expect('{', "after OR");
      Literal lit;
      lit.relation.clear();
      do {
        lit.clause.push_back(parse_atom(cur, scope));
      } while (cur.accept(';'));
      cur.expect('}', "to close OR clause");
      if (lit.clause.empty()) cur.fail("empty OR clause");
      return lit;
    }
  }
  return parse_atom(cur, scope);
}

std::vector<std::string> parse_var_list(Cursor& cur, char terminator,
                                        std::vector<std::string> seen) {
  std::vector<std::string> vars;
  cur.skip_ws();
  if (cur.peek() == terminator) return vars;
  while (true) {
    std::string name = cur.ident("a variable name");
    if (std::find(seen.begin(), seen.end(), name) != seen.end())
      cur.fail("redeclared variable '" + name + "'");
    seen.push_back(name);
    vars.push_back(std::move(name));
    if (!cur.accept(',')) break;
  }
  return vars;
}

void check_vars_used(Cursor& cur, const ConjunctiveQuery& cq) {
  std::unordered_set<std::string> used;
  auto mark = [&](const Literal& atom) {
    for (const Term& t : atom.args)
      if (t.is_var()) used.insert(t.name);
  };
  for (const Literal& lit : cq.literals) {
    if (lit.is_clause())
      for (const Literal& atom : lit.clause) mark(atom);
    else
      mark(lit);
  }
  for (const std::string& v : cq.free_vars)
    if (!used.count(v)) cur.fail("free variable '" + v + "' not used in every disjunct");
  for (const std::string& v : cq.exist_vars)
    if (!used.count(v)) cur.fail("existential variable '" + v + "' never used");
}

}  // namespace

DNFQuery parse_query(const std::string& text) {
  Cursor cur{text};
  cur.ident("a query name");
  cur.expect('(', "after query name");
  std::vector<std::string> free = parse_var_list(cur, ')', {});
  cur.expect(')', "to close the free variable list");
  cur.skip_ws();
  if (cur.text.compare(cur.pos, 2, ":=") != 0) cur.fail("expected ':='");
  cur.get();
  cur.get();

  DNFQuery q;
  do {
    ConjunctiveQuery cq;
    cq.free_vars = free;
    cur.skip_ws();
    if (cur.text.compare(cur.pos, 6, "EXISTS") == 0) {
      Cursor probe = cur;
      for (int i = 0; i < 6; ++i) probe.get();
      if (!Cursor::ident_char(probe.peek())) {
        cur = probe;
        cq.exist_vars = parse_var_list(cur, '.', free);
        cur.expect('.', "after existential variable list");
      }
    }
    Scope scope{&cq.free_vars, &cq.exist_vars};
    do {
      cq.literals.push_back(parse_literal(cur, scope));
    } while (cur.accept('&'));
    if (cq.literals.empty()) cur.fail("empty conjunction");
    check_vars_used(cur, cq);
    q.disjuncts.push_back(std::move(cq));
  } while (cur.accept('|'));

  cur.skip_ws();
  if (!cur.eof()) cur.fail("unexpected trailing input");
  return q;
}

// ---------------------------------------------------------------------------
// Printer

namespace {

std::string print_term(const Term& t) {
  return t.kind == Term::Kind::Constant ? "c:" + t.name : t.name;
}

std::string print_atom(const Literal& lit) {
  std::string s = lit.negated ? "!" : "";
  s += lit.relation + "(" + print_term(lit.args[0]) + ", " + print_term(lit.args[1]) + ")";
  return s;
}

std::string print_literal(const Literal& lit) {
  if (!lit.is_clause()) return print_atom(lit);
  std::string s = "OR{ ";
  for (std::size_t i = 0; i < lit.clause.size(); ++i) {
    if (i) s += " ; ";
    s += print_atom(lit.clause[i]);
  }
  s += " }";
  return s;
}

std::string print_body(const ConjunctiveQuery& cq) {
  std::string s;
  if (!cq.exist_vars.empty()) {
    s += "EXISTS ";
    for (std::size_t i = 0; i < cq.exist_vars.size(); ++i) {
      if (i) s += ", ";
      s += cq.exist_vars[i];
    }
    s += " . ";
  }
  for (std::size_t i = 0; i < cq.literals.size(); ++i) {
    if (i) s += " & ";
    s += print_literal(cq.literals[i]);
  }
  return s;
}

std::string print_header(const std::vector<std::string>& free) {
  std::string s = "Q(";
  for (std::size_t i = 0; i < free.size(); ++i) {
    if (i) s += ", ";
    s += free[i];
  }
  s += ") := ";
  return s;
}

}  // namespace

std::string print_query(const ConjunctiveQuery& q) {
  return print_header(q.free_vars) + print_body(q);
}

std::string print_query(const DNFQuery& q) {
  std::string s = print_header(q.free_vars());
  for (std::size_t i = 0; i < q.disjuncts.size(); ++i) {
    if (i) s += " | ";
    s += print_body(q.disjuncts[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Transformations

namespace {

void substitute(Literal& lit, const std::unordered_map<std::string, std::string>& map) {
  for (Term& t : lit.args) {
    if (t.kind == Term::Kind::FreeVar) {
      auto it = map.find(t.name);
      if (it != map.end()) t = {Term::Kind::Constant, it->second};
    }
  }
  for (Literal& atom : lit.clause) substitute(atom, map);
}

}  // namespace

ConjunctiveQuery ground(const ConjunctiveQuery& q, const std::vector<std::string>& entities) {
  if (entities.size() != q.free_vars.size())
    throw DataError("grounding tuple arity mismatch");
  std::unordered_map<std::string, std::string> map;
  for (std::size_t i = 0; i < entities.size(); ++i) map[q.free_vars[i]] = entities[i];
  ConjunctiveQuery out = q;
  out.free_vars.clear();
  for (Literal& lit : out.literals) substitute(lit, map);
  return out;
}

DNFQuery ground(const DNFQuery& q, const std::vector<std::string>& entities) {
  DNFQuery out;
  for (const ConjunctiveQuery& cq : q.disjuncts) out.disjuncts.push_back(ground(cq, entities));
  return out;
}

ConjunctiveQuery existentially_close(const ConjunctiveQuery& q) {
  ConjunctiveQuery out = q;
  out.exist_vars.insert(out.exist_vars.end(), out.free_vars.begin(), out.free_vars.end());
  out.free_vars.clear();
  auto relabel = [](Literal& lit, auto&& self) -> void {
    for (Term& t : lit.args)
      if (t.kind == Term::Kind::FreeVar) t.kind = Term::Kind::ExistVar;
    for (Literal& atom : lit.clause) self(atom, self);
  };
  for (Literal& lit : out.literals) relabel(lit, relabel);
  return out;
}

QueryGraphInfo query_graph(const ConjunctiveQuery& q) {
  std::vector<Term> terms;
  for (const Literal& lit : q.literals)
    for (const Term& t : lit.terms()) append_unique(terms, t);

  auto index_of = [&](const Term& t) {
    return static_cast<int>(std::find(terms.begin(), terms.end(), t) - terms.begin());
  };

  QueryGraphInfo info;
  info.num_terms = static_cast<int>(terms.size());

  std::vector<int> parent(terms.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  bool acyclic = true;
  for (const Literal& lit : q.literals) {
    if (lit.is_clause()) continue;
    ++info.num_atom_edges;
    int a = find(index_of(lit.args[0]));
    int b = find(index_of(lit.args[1]));
    if (a == b)
      acyclic = false;
    else
      parent[a] = b;
  }
  // Clause literals glue their whole term set together for connectivity.
  for (const Literal& lit : q.literals) {
    if (!lit.is_clause()) continue;
    std::vector<Term> ts = lit.terms();
    for (std::size_t i = 1; i < ts.size(); ++i) {
      int a = find(index_of(ts[0]));
      int b = find(index_of(ts[i]));
      if (a != b) parent[a] = b;
    }
  }

  int components = 0;
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (find(static_cast<int>(i)) == static_cast<int>(i)) ++components;
  info.connected = components <= 1;
  info.tree_like = info.connected && acyclic;
  return info;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json term_to_json(const Term& t) {
  return (t.kind == Term::Kind::Constant ? "const:" : "var:") + t.name;
}

nlohmann::json atom_to_json(const Literal& lit) {
  return nlohmann::json{{"rel", lit.relation},
                        {"args", {term_to_json(lit.args[0]), term_to_json(lit.args[1])}},
                        {"neg", lit.negated}};
}

nlohmann::json literal_to_json(const Literal& lit) {
  if (!lit.is_clause()) return atom_to_json(lit);
  nlohmann::json body = nlohmann::json::array();
  for (const Literal& atom : lit.clause) body.push_back(atom_to_json(atom));
  return nlohmann::json{{"clause", std::move(body)}};
}

Term term_from_json(const nlohmann::json& j, const ConjunctiveQuery& cq) {
  std::string s = j.get<std::string>();
  if (s.rfind("const:", 0) == 0) return {Term::Kind::Constant, s.substr(6)};
  if (s.rfind("var:", 0) != 0) throw DataError("bad term encoding: " + s);
  std::string name = s.substr(4);
  auto kind = std::find(cq.free_vars.begin(), cq.free_vars.end(), name) != cq.free_vars.end()
                  ? Term::Kind::FreeVar
                  : Term::Kind::ExistVar;
  if (kind == Term::Kind::ExistVar &&
      std::find(cq.exist_vars.begin(), cq.exist_vars.end(), name) == cq.exist_vars.end())
    throw DataError("undeclared variable in JSON query: " + name);
  return {kind, name};
}

Literal atom_from_json(const nlohmann::json& j, const ConjunctiveQuery& cq) {
  Literal lit;
  lit.relation = j.at("rel").get<std::string>();
  const auto& args = j.at("args");
  if (!args.is_array() || args.size() != 2) throw DataError("atoms are binary");
  lit.args.push_back(term_from_json(args[0], cq));
  lit.args.push_back(term_from_json(args[1], cq));
  lit.negated = j.value("neg", false);
  return lit;
}

}  // namespace

nlohmann::json query_to_json(const ConjunctiveQuery& q) {
  nlohmann::json lits = nlohmann::json::array();
  for (const Literal& lit : q.literals) lits.push_back(literal_to_json(lit));
  return nlohmann::json{
      {"free", q.free_vars}, {"exists", q.exist_vars}, {"literals", std::move(lits)}};
}

nlohmann::json query_to_json(const DNFQuery& q) {
  if (q.disjuncts.size() == 1) return query_to_json(q.disjuncts[0]);
  nlohmann::json arr = nlohmann::json::array();
  for (const ConjunctiveQuery& cq : q.disjuncts) arr.push_back(query_to_json(cq));
  return arr;
}

ConjunctiveQuery conjunctive_query_from_json(const nlohmann::json& j) {
  ConjunctiveQuery cq;
  cq.free_vars = j.at("free").get<std::vector<std::string>>();
  cq.exist_vars = j.at("exists").get<std::vector<std::string>>();
  for (const auto& lj : j.at("literals")) {
    if (lj.contains("clause")) {
      Literal lit;
      for (const auto& aj : lj.at("clause")) lit.clause.push_back(atom_from_json(aj, cq));
      if (lit.clause.empty()) throw DataError("empty OR clause in JSON query");
      cq.literals.push_back(std::move(lit));
    } else {
      cq.literals.push_back(atom_from_json(lj, cq));
    }
  }
  if (cq.literals.empty()) throw DataError("empty conjunction in JSON query");
  return cq;
}

DNFQuery query_from_json(const nlohmann::json& j) {
  DNFQuery q;
  if (j.is_array()) {
    for (const auto& dj : j) q.disjuncts.push_back(conjunctive_query_from_json(dj));
    if (q.disjuncts.empty()) throw DataError("empty query");
  } else {
    q.disjuncts.push_back(conjunctive_query_from_json(j));
  }
  return q;
}

}  // namespace anycq
