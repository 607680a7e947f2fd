#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "anycq/kg.hpp"
#include "anycq/rng.hpp"

namespace anycq {

// Pluggable link prediction scores in [0, 1]. The bulk existence queries ask
// whether any completion reaches the 0.5 satisfaction threshold; they must
// stay consistent with pointwise score().
class LinkPredictor {
 public:
  virtual ~LinkPredictor() = default;
  virtual double score(int r, int a, int b) const = 0;
  // True iff some b has score(r, a, b) >= 0.5.
  virtual bool exists_tail(int r, int a) const = 0;
  // True iff some a has score(r, a, b) >= 0.5.
  virtual bool exists_head(int r, int b) const = 0;
};

// Indicator of fact membership in a reference graph (usually the complete
// graph of a benchmark). Holds a reference; the graph must outlive it.
class PerfectPredictor : public LinkPredictor {
 public:
  explicit PerfectPredictor(const KnowledgeGraph& g) : g_(g) {}
  double score(int r, int a, int b) const override {
    return g_.contains_fact(r, a, b) ? 1.0 : 0.0;
  }
  bool exists_tail(int r, int a) const override { return g_.is_head_of(r, a); }
  bool exists_head(int r, int b) const override { return g_.is_tail_of(r, b); }
  const KnowledgeGraph& graph() const { return g_; }

 private:
  const KnowledgeGraph& g_;
};

// Sparse explicit score table with default 0. Neural predictors are fed in
// as dumps of this form.
class TabularPredictor : public LinkPredictor {
 public:
  TabularPredictor() = default;

  void set(int r, int a, int b, double p);
  double score(int r, int a, int b) const override;
  bool exists_tail(int r, int a) const override { return tail_exists_.count(pair_key(r, a)) > 0; }
  bool exists_head(int r, int b) const override { return head_exists_.count(pair_key(r, b)) > 0; }
  std::size_t size() const { return table_.size(); }

  // Lines of "relation<TAB>head<TAB>tail<TAB>prob", names resolved against
  // the graph vocabulary. Unknown names or probabilities outside [0, 1] are
  // data errors.
  static TabularPredictor load(std::istream& in, const KnowledgeGraph& vocab);
  static TabularPredictor load_file(const std::string& path, const KnowledgeGraph& vocab);
  void dump(std::ostream& out, const KnowledgeGraph& vocab) const;

 private:
  static std::uint64_t triple_key(int r, int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 42) ^
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 21) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(b));
  }
  static std::uint64_t pair_key(int r, int x) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 32) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(x));
  }
  std::unordered_map<std::uint64_t, double> table_;
  std::unordered_set<std::uint64_t> tail_exists_;
  std::unordered_set<std::uint64_t> head_exists_;
};

// Perfect scores corrupted by noise: true facts draw from (0.5, 1), an equal
// number of sampled negatives from [0, 0.5), then exactly
// llround(flip_rate * #sampled) of the sampled triples are reflected across
// 0.5. Deterministic per seed; flip_rate must be < 0.5.
TabularPredictor noisy_perfect(const KnowledgeGraph& g, double flip_rate, std::uint64_t seed);

// Clamps scores of facts observed in g_obs to 1 and everything else to at
// most 0.9999. Holds references; both must outlive the result.
class AugmentedPredictor : public LinkPredictor {
 public:
  AugmentedPredictor(const LinkPredictor& inner, const KnowledgeGraph& g_obs)
      : inner_(inner), obs_(g_obs) {}
  double score(int r, int a, int b) const override;
  bool exists_tail(int r, int a) const override;
  bool exists_head(int r, int b) const override;

 private:
  const LinkPredictor& inner_;
  const KnowledgeGraph& obs_;
};

}  // namespace anycq
