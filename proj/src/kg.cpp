#include "anycq/kg.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "anycq/errors.hpp"

namespace anycq {

namespace {
const std::vector<int> kEmpty;
}

int KnowledgeGraph::intern(std::vector<std::string>& names,
                           std::unordered_map<std::string, int>& index,
                           std::string_view name) {
  auto it = index.find(std::string(name));
  if (it != index.end()) return it->second;
  int id = static_cast<int>(names.size());
  names.emplace_back(name);
  index.emplace(names.back(), id);
  return id;
}

KnowledgeGraph KnowledgeGraph::load_triples(std::istream& in) {
  KnowledgeGraph g;
  std::vector<Triple> triples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos) {
      throw ParseError("expected head<TAB>relation<TAB>tail", line_no, 1);
    }
    std::string_view head(line.data(), tab1);
    std::string_view rel(line.data() + tab1 + 1, tab2 - tab1 - 1);
    std::string_view tail(line.data() + tab2 + 1, line.size() - tab2 - 1);
    if (head.empty() || rel.empty() || tail.empty()) {
      throw ParseError("empty field in triple", line_no, 1);
    }
    Triple t;
    t.head = g.intern(g.entity_names_, g.entity_index_, head);
    t.rel = g.intern(g.relation_names_, g.relation_index_, rel);
    t.tail = g.intern(g.entity_names_, g.entity_index_, tail);
    triples.push_back(t);
  }
  g.finalize(std::move(triples));
  return g;
}

KnowledgeGraph KnowledgeGraph::load_triples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file: " + path);
  return load_triples(in);
}

KnowledgeGraph KnowledgeGraph::from_data(std::vector<std::string> entities,
                                         std::vector<std::string> relations,
                                         const std::vector<Triple>& facts) {
  KnowledgeGraph g;
  g.entity_names_ = std::move(entities);
  g.relation_names_ = std::move(relations);
  for (int i = 0; i < g.num_entities(); ++i) {
    if (!g.entity_index_.emplace(g.entity_names_[i], i).second)
      throw DataError("duplicate entity name: " + g.entity_names_[i]);
  }
  for (int i = 0; i < g.num_relations(); ++i) {
    if (!g.relation_index_.emplace(g.relation_names_[i], i).second)
      throw DataError("duplicate relation name: " + g.relation_names_[i]);
  }
  for (const Triple& t : facts) {
    if (t.rel < 0 || t.rel >= g.num_relations() || t.head < 0 ||
        t.head >= g.num_entities() || t.tail < 0 || t.tail >= g.num_entities())
      throw DataError("triple id out of vocabulary range");
  }
  g.finalize(facts);
  return g;
}

void KnowledgeGraph::finalize(std::vector<Triple> triples) {
  // The packed 64-bit fact key needs ids below 2^21.
  if (num_entities() >= (1 << 21) || num_relations() >= (1 << 21))
    throw DataError("graph vocabulary exceeds supported size");
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  facts_ = std::move(triples);

  by_head_.assign(num_relations(), {});
  by_tail_.assign(num_relations(), {});
  heads_of_.assign(num_relations(), {});
  tails_of_.assign(num_relations(), {});
  out_edges_.assign(num_entities(), {});
  in_edges_.assign(num_entities(), {});
  fact_set_.reserve(facts_.size() * 2);
  for (const Triple& t : facts_) {
    fact_set_.insert(fact_key(t.rel, t.head, t.tail));
    by_head_[t.rel][t.head].push_back(t.tail);
    by_tail_[t.rel][t.tail].push_back(t.head);
    heads_of_[t.rel].push_back(t.head);
    tails_of_[t.rel].push_back(t.tail);
    out_edges_[t.head].emplace_back(t.rel, t.tail);
    in_edges_[t.tail].emplace_back(t.rel, t.head);
  }
  auto dedupe = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  for (int r = 0; r < num_relations(); ++r) {
    dedupe(heads_of_[r]);
    dedupe(tails_of_[r]);
  }
}

std::optional<int> KnowledgeGraph::entity_id(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> KnowledgeGraph::relation_id(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

bool KnowledgeGraph::contains_fact(int r, int h, int t) const {
  if (r < 0 || r >= num_relations() || h < 0 || h >= num_entities() || t < 0 ||
      t >= num_entities())
    return false;
  return fact_set_.count(fact_key(r, h, t)) > 0;
}

const std::vector<int>& KnowledgeGraph::tails(int r, int h) const {
  if (r < 0 || r >= num_relations()) return kEmpty;
  auto it = by_head_[r].find(h);
  return it == by_head_[r].end() ? kEmpty : it->second;
}

const std::vector<int>& KnowledgeGraph::heads(int r, int t) const {
  if (r < 0 || r >= num_relations()) return kEmpty;
  auto it = by_tail_[r].find(t);
  return it == by_tail_[r].end() ? kEmpty : it->second;
}

const std::vector<int>& KnowledgeGraph::heads_of(int r) const {
  if (r < 0 || r >= num_relations()) return kEmpty;
  return heads_of_[r];
}

const std::vector<int>& KnowledgeGraph::tails_of(int r) const {
  if (r < 0 || r >= num_relations()) return kEmpty;
  return tails_of_[r];
}

bool KnowledgeGraph::is_head_of(int r, int a) const {
  const auto& v = heads_of(r);
  return std::binary_search(v.begin(), v.end(), a);
}

bool KnowledgeGraph::is_tail_of(int r, int b) const {
  const auto& v = tails_of(r);
  return std::binary_search(v.begin(), v.end(), b);
}

std::vector<int> KnowledgeGraph::neighbors(int v) const {
  std::vector<int> out;
  for (const auto& [r, t] : out_edges_.at(v))
    if (t != v) out.push_back(t);
  for (const auto& [r, h] : in_edges_.at(v))
    if (h != v) out.push_back(h);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool KnowledgeGraph::is_subgraph_of(const KnowledgeGraph& other) const {
  if (entity_names_ != other.entity_names_ || relation_names_ != other.relation_names_)
    return false;
  for (const Triple& t : facts_)
    if (!other.contains_fact(t.rel, t.head, t.tail)) return false;
  return true;
}

void KnowledgeGraph::write_triples(std::ostream& out) const {
  for (const Triple& t : facts_) {
    out << entity_names_[t.head] << '\t' << relation_names_[t.rel] << '\t'
        << entity_names_[t.tail] << '\n';
  }
}

}  // namespace anycq
