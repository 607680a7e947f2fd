#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace anycq {

struct Triple {
  int rel = 0;
  int head = 0;
  int tail = 0;
  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Dictionary-encoded knowledge graph. Entity and relation names are interned
// into dense ids in first-appearance order; all engine-level operations work
// on ids. Immutable after construction.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Reads tab-separated "head<TAB>relation<TAB>tail" lines. Blank lines are
  // skipped. Duplicate triples collapse to one fact. Malformed lines raise
  // ParseError with a 1-based line number.
  static KnowledgeGraph load_triples(std::istream& in);
  static KnowledgeGraph load_triples_file(const std::string& path);

  // Programmatic construction from an explicit vocabulary. Used by graph
  // generators and by subset extraction, where the vocabulary must stay
  // identical to a parent graph even if some entity loses all its facts.
  static KnowledgeGraph from_data(std::vector<std::string> entities,
                                  std::vector<std::string> relations,
                                  const std::vector<Triple>& facts);

  int num_entities() const { return static_cast<int>(entity_names_.size()); }
  int num_relations() const { return static_cast<int>(relation_names_.size()); }
  std::size_t num_facts() const { return facts_.size(); }
  const std::vector<Triple>& facts() const { return facts_; }

  const std::string& entity_name(int id) const { return entity_names_.at(id); }
  const std::string& relation_name(int id) const { return relation_names_.at(id); }
  const std::vector<std::string>& entity_names() const { return entity_names_; }
  const std::vector<std::string>& relation_names() const { return relation_names_; }
  std::optional<int> entity_id(std::string_view name) const;
  std::optional<int> relation_id(std::string_view name) const;

  // Out-of-range ids are not an error; they name nothing, so the answer is no.
  bool contains_fact(int r, int h, int t) const;

  // Sorted tail ids of facts r(h, *); empty vector when none.
  const std::vector<int>& tails(int r, int h) const;
  const std::vector<int>& heads(int r, int t) const;

  // Sorted distinct entities occurring as head (resp. tail) of relation r.
  const std::vector<int>& heads_of(int r) const;
  const std::vector<int>& tails_of(int r) const;
  bool is_head_of(int r, int a) const;
  bool is_tail_of(int r, int b) const;

  // Per-entity incident facts: (relation, other endpoint).
  const std::vector<std::pair<int, int>>& out_edges(int v) const { return out_edges_.at(v); }
  const std::vector<std::pair<int, int>>& in_edges(int v) const { return in_edges_.at(v); }

  // Distinct undirected neighbors, sorted, excluding v itself.
  std::vector<int> neighbors(int v) const;

  // True when this graph has exactly the same vocabulary as `other` and its
  // fact set is included in other's.
  bool is_subgraph_of(const KnowledgeGraph& other) const;

  void write_triples(std::ostream& out) const;

 private:
  int intern(std::vector<std::string>& names,
             std::unordered_map<std::string, int>& index, std::string_view name);
  void finalize(std::vector<Triple> triples);

  static std::uint64_t fact_key(int r, int h, int t) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 42) ^
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h)) << 21) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(t));
  }

  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, int> entity_index_;
  std::unordered_map<std::string, int> relation_index_;
  std::vector<Triple> facts_;
  std::unordered_set<std::uint64_t> fact_set_;
  std::vector<std::unordered_map<int, std::vector<int>>> by_head_;  // [rel][head] -> tails
  std::vector<std::unordered_map<int, std::vector<int>>> by_tail_;  // [rel][tail] -> heads
  std::vector<std::vector<int>> heads_of_;
  std::vector<std::vector<int>> tails_of_;
  std::vector<std::vector<std::pair<int, int>>> out_edges_;
  std::vector<std::vector<std::pair<int, int>>> in_edges_;
};

}  // namespace anycq
