#include "anycq/compgraph.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "anycq/errors.hpp"
#include "anycq/fuzzy.hpp"

namespace anycq {

CompGraph::CompGraph(BoundQuery q, int num_entities)
    : q_(std::move(q)), num_entities_(num_entities) {
  if (num_entities_ <= 0) throw DataError("computational graph needs a non-empty domain");
  lits_of_var_.assign(q_.num_vars(), {});
  lit_slot_begin_.push_back(0);
  for (int li = 0; li < num_literals(); ++li) {
    const BoundLiteral& lit = q_.literals[li];
    for (const TermRef& t : lit.terms) {
      Slot s;
      s.literal = li;
      s.term = t;
      s.domain = t.is_var ? num_entities_ : 1;
      s.value_offset = t.is_var ? var_value_offset(t.index) : const_value_offset(t.index);
      s.label_offset = static_cast<int>(total_vl_edges_);
      total_vl_edges_ += s.domain;
      slots_.push_back(s);
      if (t.is_var) {
        auto& lits = lits_of_var_[t.index];
        if (lits.empty() || lits.back() != li) lits.push_back(li);
      }
    }
    lit_slot_begin_.push_back(static_cast<int>(slots_.size()));
  }
  for (int v = 0; v < q_.num_vars(); ++v)
    if (lits_of_var_[v].empty())
      throw DataError("variable " + q_.var_names[v] + " is mentioned by no literal");
  pe_.assign(total_vl_edges_, 1);
}

// ---------------------------------------------------------------------------
// PE labels

namespace {

// Evaluates one atom with a single term overridden.
double atom_score_override(const LinkPredictor& pi, const BoundAtom& atom,
                           std::span<const int> alpha, std::span<const int> consts,
                           const TermRef& over, int value) {
  auto val = [&](const TermRef& t) {
    if (t == over) return value;
    return term_value(t, alpha, consts);
  };
  double s = pi.score(atom.relation, val(atom.arg0), val(atom.arg1));
  return atom.negated ? 1.0 - s : s;
}

struct ExactPE {
  const LinkPredictor& pi;
  int num_entities;
  std::span<const int> consts;
  // Memo for "is this atom satisfiable at all": key is (relation, negated,
  // arg0 code, arg1 code) where a variable codes as -1 (-2 when both args are
  // the same variable) and a constant as its entity id.
  std::map<std::tuple<int, bool, int, int>, bool> any_sat_memo;

  bool binarized(double s) const { return s >= 0.5; }

  bool positive_exists_tail(int r, int a) const { return pi.exists_tail(r, a); }
  bool positive_exists_head(int r, int b) const { return pi.exists_head(r, b); }

  bool negated_exists_tail(int r, int a) const {
    for (int b = 0; b < num_entities; ++b)
      if (pi.score(r, a, b) <= 0.5) return true;
    return false;
  }
  bool negated_exists_head(int r, int b) const {
    for (int a = 0; a < num_entities; ++a)
      if (pi.score(r, a, b) <= 0.5) return true;
    return false;
  }

  bool any_sat(const BoundAtom& atom) {
    int c0 = atom.arg0.is_var ? -1 : consts[atom.arg0.index];
    int c1 = atom.arg1.is_var ? -1 : consts[atom.arg1.index];
    if (atom.arg0.is_var && atom.arg1.is_var && atom.arg0.index == atom.arg1.index)
      c0 = c1 = -2;
    auto key = std::make_tuple(atom.relation, atom.negated, c0, c1);
    auto it = any_sat_memo.find(key);
    if (it != any_sat_memo.end()) return it->second;
    bool sat = false;
    if (c0 >= 0 && c1 >= 0) {
      double s = pi.score(atom.relation, c0, c1);
      sat = binarized(atom.negated ? 1.0 - s : s);
    } else if (c0 == -2) {  // same variable in both positions
      for (int a = 0; a < num_entities && !sat; ++a) {
        double s = pi.score(atom.relation, a, a);
        sat = binarized(atom.negated ? 1.0 - s : s);
      }
    } else if (c0 >= 0) {  // (const, var)
      sat = atom.negated ? negated_exists_tail(atom.relation, c0)
                         : positive_exists_tail(atom.relation, c0);
    } else if (c1 >= 0) {  // (var, const)
      sat = atom.negated ? negated_exists_head(atom.relation, c1)
                         : positive_exists_head(atom.relation, c1);
    } else {  // two distinct variables
      for (int a = 0; a < num_entities && !sat; ++a)
        sat = atom.negated ? negated_exists_tail(atom.relation, a)
                           : positive_exists_tail(atom.relation, a);
    }
    any_sat_memo.emplace(key, sat);
    return sat;
  }

  // Can `atom` reach satisfaction while term `e` is pinned to `value`, with
  // every other term free?
  bool atom_pe(const BoundAtom& atom, const TermRef& e, int value) {
    bool in0 = atom.arg0 == e;
    bool in1 = atom.arg1 == e;
    if (!in0 && !in1) return any_sat(atom);
    if (in0 && in1) {
      double s = pi.score(atom.relation, value, value);
      return binarized(atom.negated ? 1.0 - s : s);
    }
    const TermRef& other = in0 ? atom.arg1 : atom.arg0;
    if (!other.is_var) {
      int c = consts[other.index];
      double s = in0 ? pi.score(atom.relation, value, c) : pi.score(atom.relation, c, value);
      return binarized(atom.negated ? 1.0 - s : s);
    }
    if (in0)
      return atom.negated ? negated_exists_tail(atom.relation, value)
                          : positive_exists_tail(atom.relation, value);
    return atom.negated ? negated_exists_head(atom.relation, value)
                        : positive_exists_head(atom.relation, value);
  }
};

}  // namespace

void CompGraph::set_pe_exact(const LinkPredictor& pi) {
  ExactPE ctx{pi, num_entities_, q_.constants, {}};
  for (const Slot& s : slots_) {
    const BoundLiteral& lit = q_.literals[s.literal];
    for (int a = 0; a < s.domain; ++a) {
      int value = s.term.is_var ? a : q_.constants[s.term.index];
      bool pe = false;
      for (const BoundAtom& atom : lit.atoms) {
        if (ctx.atom_pe(atom, s.term, value)) {
          pe = true;
          break;
        }
      }
      pe_[s.label_offset + a] = pe ? 1 : 0;
    }
  }
}

namespace {

// Closed-world approximation for one positive atom: does the observable
// graph witness a completion of `atom` with term `e` pinned to `value`?
bool cwa_atom(const KnowledgeGraph& g, const BoundAtom& atom, std::span<const int> consts,
              const TermRef& e, int value, bool pinned) {
  if (atom.negated) return true;
  auto side = [&](const TermRef& t) -> int {
    if (pinned && t == e) return value;
    return t.is_var ? -1 : consts[t.index];
  };
  bool self_loop = atom.arg0.is_var && atom.arg1.is_var && atom.arg0.index == atom.arg1.index;
  if (self_loop && pinned && atom.arg0 == e)
    return g.is_head_of(atom.relation, value) && g.is_tail_of(atom.relation, value);
  int h = side(atom.arg0);
  int t = side(atom.arg1);
  if (h >= 0 && t >= 0) return g.contains_fact(atom.relation, h, t);
  if (h >= 0) return g.is_head_of(atom.relation, h);
  if (t >= 0) return g.is_tail_of(atom.relation, t);
  return !g.heads_of(atom.relation).empty();
}

}  // namespace

void CompGraph::set_pe_cwa(const KnowledgeGraph& g_obs) {
  for (const Slot& s : slots_) {
    const BoundLiteral& lit = q_.literals[s.literal];
    for (int a = 0; a < s.domain; ++a) {
      int value = s.term.is_var ? a : q_.constants[s.term.index];
      bool pe = false;
      for (const BoundAtom& atom : lit.atoms) {
        bool mentions = atom.arg0 == s.term || atom.arg1 == s.term;
        if (cwa_atom(g_obs, atom, q_.constants, s.term, value, mentions)) {
          pe = true;
          break;
        }
      }
      pe_[s.label_offset + a] = pe ? 1 : 0;
    }
  }
}

void CompGraph::set_pe_all_one() { std::fill(pe_.begin(), pe_.end(), 1); }

void CompGraph::set_pe(PEMode mode, const LinkPredictor* pi, const KnowledgeGraph* g_obs) {
  switch (mode) {
    case PEMode::Exact:
      if (!pi) throw DataError("exact PE labels need a predictor");
      set_pe_exact(*pi);
      break;
    case PEMode::CWA:
      if (!g_obs) throw DataError("CWA PE labels need an observable graph");
      set_pe_cwa(*g_obs);
      break;
    case PEMode::AllOne:
      set_pe_all_one();
      break;
  }
}

// ---------------------------------------------------------------------------
// LE labels

void CompGraph::le_for_literal(const LinkPredictor& pi, int li, std::span<const int> alpha,
                               std::vector<std::uint8_t>& le) const {
  const BoundLiteral& lit = q_.literals[li];
  for (const Slot& s : slots_of_literal(li)) {
    for (int a = 0; a < s.domain; ++a) {
      int value = s.term.is_var ? a : q_.constants[s.term.index];
      double best = 0.0;
      for (const BoundAtom& atom : lit.atoms) {
        double sc = atom_score_override(pi, atom, alpha, q_.constants, s.term, value);
        if (sc > best) best = sc;
        if (best >= 0.5) break;
      }
      le[s.label_offset + a] = best >= 0.5 ? 1 : 0;
    }
  }
}

void CompGraph::compute_le(const LinkPredictor& pi, std::span<const int> alpha,
                           std::vector<std::uint8_t>& le) const {
  le.assign(total_vl_edges_, 0);
  for (int li = 0; li < num_literals(); ++li) le_for_literal(pi, li, alpha, le);
}

void CompGraph::update_le(const LinkPredictor& pi, std::span<const int> alpha,
                          std::span<const int> changed_vars,
                          std::vector<std::uint8_t>& le) const {
  std::vector<char> touched(num_literals(), 0);
  for (int v : changed_vars)
    for (int li : lits_of_var_[v]) touched[li] = 1;
  for (int li = 0; li < num_literals(); ++li)
    if (touched[li]) le_for_literal(pi, li, alpha, le);
}

}  // namespace anycq
