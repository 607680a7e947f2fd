#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "anycq/bound_query.hpp"
#include "anycq/kg.hpp"
#include "anycq/predictor.hpp"

namespace anycq {

enum class PEMode { Exact, CWA, AllOne };

// Computational graph of a query against an entity domain.
//
// Vertices: one term vertex per variable/constant, one value vertex per
// (variable, entity) pair plus one per constant, one vertex per literal.
// Edges: every value vertex links to its term, and to every literal that
// mentions the term. Value-literal edges carry two binary labels: PE
// (assignment-independent promise) and LE (current-assignment truth).
//
// Value vertices are laid out in blocks: variable i occupies
// [i*|V|, (i+1)*|V|), constant slot j sits at num_vars*|V| + j. The
// value-literal edges are grouped into "slots", one per (literal, term)
// pair, each covering the term's whole value block; flat label arrays are
// indexed by slot.label_offset + value.
class CompGraph {
 public:
  struct Slot {
    int literal = 0;
    TermRef term;
    int value_offset = 0;
    int domain = 0;
    int label_offset = 0;
  };

  CompGraph(BoundQuery q, int num_entities);

  const BoundQuery& query() const { return q_; }
  int num_entities() const { return num_entities_; }
  int num_vars() const { return q_.num_vars(); }
  int num_consts() const { return static_cast<int>(q_.constants.size()); }
  int num_terms() const { return num_vars() + num_consts(); }
  int num_literals() const { return static_cast<int>(q_.literals.size()); }
  int num_value_vertices() const { return num_vars() * num_entities_ + num_consts(); }

  std::int64_t vertex_count() const {
    return static_cast<std::int64_t>(num_value_vertices()) + num_terms() + num_literals();
  }
  std::int64_t edge_count() const {
    return static_cast<std::int64_t>(num_value_vertices()) + total_vl_edges_;
  }
  std::int64_t vl_edge_count() const { return total_vl_edges_; }

  int var_value_offset(int var) const { return var * num_entities_; }
  int const_value_offset(int slot) const { return num_vars() * num_entities_ + slot; }
  // Term index: variables first, then constant slots.
  int term_value_offset(int term) const {
    return term < num_vars() ? term * num_entities_ : const_value_offset(term - num_vars());
  }
  int term_domain(int term) const { return term < num_vars() ? num_entities_ : 1; }
  int term_of_value(int v) const {
    return v < num_vars() * num_entities_ ? v / num_entities_ : num_vars() + (v - num_vars() * num_entities_);
  }

  const std::vector<Slot>& slots() const { return slots_; }
  std::span<const Slot> slots_of_literal(int lit) const {
    return std::span<const Slot>(slots_).subspan(lit_slot_begin_[lit],
                                                 lit_slot_begin_[lit + 1] - lit_slot_begin_[lit]);
  }
  const std::vector<int>& literals_of_var(int var) const { return lits_of_var_[var]; }

  void set_pe(PEMode mode, const LinkPredictor* pi, const KnowledgeGraph* g_obs);
  void set_pe_exact(const LinkPredictor& pi);
  void set_pe_cwa(const KnowledgeGraph& g_obs);
  void set_pe_all_one();
  const std::vector<std::uint8_t>& pe() const { return pe_; }

  // LE labels under a full assignment: for edge (psi, value a of term e), the
  // binarized score of psi with e overridden to a (all occurrences move).
  void compute_le(const LinkPredictor& pi, std::span<const int> alpha,
                  std::vector<std::uint8_t>& le) const;
  // Recompute only literals mentioning a changed variable.
  void update_le(const LinkPredictor& pi, std::span<const int> alpha,
                 std::span<const int> changed_vars, std::vector<std::uint8_t>& le) const;

 private:
  void le_for_literal(const LinkPredictor& pi, int lit, std::span<const int> alpha,
                      std::vector<std::uint8_t>& le) const;

  BoundQuery q_;
  int num_entities_;
  std::vector<Slot> slots_;
  std::vector<int> lit_slot_begin_;
  std::vector<std::vector<int>> lits_of_var_;
  std::int64_t total_vl_edges_ = 0;
  std::vector<std::uint8_t> pe_;
};

}  // namespace anycq
