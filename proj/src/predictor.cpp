#include "anycq/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "anycq/errors.hpp"

namespace anycq {

void TabularPredictor::set(int r, int a, int b, double p) {
  if (p < 0.0 || p > 1.0) throw DataError("probability outside [0,1]");
  table_[triple_key(r, a, b)] = p;
  if (p >= 0.5) {
    tail_exists_.insert(pair_key(r, a));
    head_exists_.insert(pair_key(r, b));
  }
}

double TabularPredictor::score(int r, int a, int b) const {
  auto it = table_.find(triple_key(r, a, b));
  return it == table_.end() ? 0.0 : it->second;
}

TabularPredictor TabularPredictor::load(std::istream& in, const KnowledgeGraph& vocab) {
  TabularPredictor p;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4)
      throw ParseError("expected relation<TAB>head<TAB>tail<TAB>prob", line_no, 1);
    auto r = vocab.relation_id(fields[0]);
    auto a = vocab.entity_id(fields[1]);
    auto b = vocab.entity_id(fields[2]);
    if (!r) throw ParseError("unknown relation: " + fields[0], line_no, 1);
    if (!a) throw ParseError("unknown entity: " + fields[1], line_no, 1);
    if (!b) throw ParseError("unknown entity: " + fields[2], line_no, 1);
    double prob;
    try {
      std::size_t used = 0;
      prob = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ParseError("bad probability: " + fields[3], line_no, 1);
    }
    if (prob < 0.0 || prob > 1.0)
      throw ParseError("probability outside [0,1]: " + fields[3], line_no, 1);
    p.set(*r, *a, *b, prob);
  }
  return p;
}

TabularPredictor TabularPredictor::load_file(const std::string& path,
                                             const KnowledgeGraph& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictor dump: " + path);
  return load(in, vocab);
}

void TabularPredictor::dump(std::ostream& out, const KnowledgeGraph& vocab) const {
  // Stable order for byte-identical dumps.
  std::vector<std::pair<std::uint64_t, double>> rows(table_.begin(), table_.end());
  std::sort(rows.begin(), rows.end());
  char buf[64];
  for (const auto& [key, prob] : rows) {
    int r = static_cast<int>(key >> 42);
    int a = static_cast<int>((key >> 21) & ((1u << 21) - 1));
    int b = static_cast<int>(key & ((1u << 21) - 1));
    std::snprintf(buf, sizeof buf, "%.17g", prob);
    out << vocab.relation_name(r) << '\t' << vocab.entity_name(a) << '\t'
        << vocab.entity_name(b) << '\t' << buf << '\n';
  }
}

TabularPredictor noisy_perfect(const KnowledgeGraph& g, double flip_rate,
                               std::uint64_t seed) {
  if (flip_rate < 0.0 || flip_rate >= 0.5)
    throw DataError("flip_rate must lie in [0, 0.5)");
  Rng rng(seed);
  struct Row {
    Triple t;
    double p;
  };
  std::vector<Row> rows;
  rows.reserve(g.num_facts() * 2);
  for (const Triple& t : g.facts()) {
    double u;
    do {
      u = uniform_double(rng);
    } while (u == 0.0);
    rows.push_back({t, 0.5 + u / 2});
  }

  std::unordered_set<std::uint64_t> taken;
  auto key = [](const Triple& t) {
    return (static_cast<std::uint64_t>(t.rel) << 42) ^
           (static_cast<std::uint64_t>(t.head) << 21) ^ static_cast<std::uint64_t>(t.tail);
  };
  std::size_t want = g.num_facts();
  std::size_t attempts = 0;
  const std::size_t max_attempts = want * 200 + 1000;
  while (taken.size() < want && attempts++ < max_attempts) {
    Triple t{static_cast<int>(uniform_index(rng, g.num_relations())),
             static_cast<int>(uniform_index(rng, g.num_entities())),
             static_cast<int>(uniform_index(rng, g.num_entities()))};
    if (g.contains_fact(t.rel, t.head, t.tail)) continue;
    if (!taken.insert(key(t)).second) continue;
    rows.push_back({t, uniform_double(rng) / 2});
  }

  std::size_t flips = static_cast<std::size_t>(std::llround(flip_rate * rows.size()));
  // Seeded partial Fisher-Yates picks exactly `flips` distinct rows.
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < flips; ++i) {
    std::size_t j = i + uniform_index(rng, order.size() - i);
    std::swap(order[i], order[j]);
    rows[order[i]].p = 1.0 - rows[order[i]].p;
  }

  TabularPredictor p;
  for (const Row& row : rows) p.set(row.t.rel, row.t.head, row.t.tail, row.p);
  return p;
}

double AugmentedPredictor::score(int r, int a, int b) const {
  if (obs_.contains_fact(r, a, b)) return 1.0;
  return std::min(inner_.score(r, a, b), 0.9999);
}

bool AugmentedPredictor::exists_tail(int r, int a) const {
  return obs_.is_head_of(r, a) || inner_.exists_tail(r, a);
}

bool AugmentedPredictor::exists_head(int r, int b) const {
  return obs_.is_tail_of(r, b) || inner_.exists_head(r, b);
}

}  // namespace anycq
