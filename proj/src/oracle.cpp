#include "anycq/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <utility>

#include "anycq/errors.hpp"

namespace anycq {

namespace {

class Solver {
 public:
  Solver(const BoundQuery& q, const KnowledgeGraph& g, const OracleConfig& cfg)
      : q_(q), g_(g), cfg_(cfg), start_(std::chrono::steady_clock::now()) {}

  OracleResult run() {
    const int nv = q_.num_vars();
    assign_.assign(nv, -1);
    lits_of_var_.assign(nv, {});
    unbound_.assign(q_.literals.size(), 0);
    std::vector<char> in_pos(nv, 0), in_neg(nv, 0);
    for (std::size_t i = 0; i < q_.literals.size(); ++i) {
      const BoundLiteral& lit = q_.literals[i];
      const bool positive = lit.is_clause || !lit.atoms[0].negated;
      for (const TermRef& t : lit.terms) {
        if (!t.is_var) continue;
        lits_of_var_[t.index].push_back(static_cast<int>(i));
        ++unbound_[i];
        (positive ? in_pos : in_neg)[t.index] = 1;
      }
    }
    for (int z = 0; z < nv; ++z)
      if (in_neg[z] && !in_pos[z])
        throw DataError("unsafe query: variable " + q_.var_names[z] +
                        " occurs only under negation");

    bool ground_ok = true;
    for (std::size_t i = 0; i < q_.literals.size(); ++i)
      if (unbound_[i] == 0 && !literal_holds(q_.literals[i])) {
        ground_ok = false;
        break;
      }

    if (ground_ok) {
      if (!cfg_.seed_answers.empty() && q_.num_free > 0) {
        for (const auto& seed : cfg_.seed_answers) {
          if (static_cast<int>(seed.size()) > q_.num_free)
            throw DataError("seed answer longer than the free prefix");
          seed_ = &seed;
          apply_seed(0);
          seed_ = nullptr;
          if (stop()) break;
        }
      } else {
        enum_free(0);
      }
    }

    std::sort(res_.answers.begin(), res_.answers.end());
    res_.answers.erase(std::unique(res_.answers.begin(), res_.answers.end()),
                       res_.answers.end());
    res_.exhausted = !truncated_;
    res_.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return res_;
  }

 private:
  bool stop() const { return truncated_ || mode_stop_; }

  bool tick() {
    ++res_.nodes;
    if (cfg_.max_nodes && res_.nodes > cfg_.max_nodes) {
      truncated_ = true;
      res_.timed_out = true;
    } else if (cfg_.timeout_sec > 0 && res_.nodes % 10000 == 0) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      if (elapsed >= cfg_.timeout_sec) {
        truncated_ = true;
        res_.timed_out = true;
      }
    }
    return !truncated_;
  }

  int ground_value(const TermRef& t) const {
    return t.is_var ? assign_[t.index] : q_.constants[t.index];
  }

  bool literal_holds(const BoundLiteral& lit) const {
    for (const BoundAtom& a : lit.atoms) {
      const bool in =
          g_.contains_fact(a.relation, ground_value(a.arg0), ground_value(a.arg1));
      if (in != a.negated) return true;
      if (!lit.is_clause) return false;
    }
    return false;
  }

  static void intersect_sorted(std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    a = std::move(out);
  }

  // Sorted candidates for z: intersection over positive atoms mentioning it,
  // using index lookups where the opposite term is already ground. Variables
  // constrained by no positive atom range over the whole domain.
  std::vector<int> candidates_for(int z) const {
    std::vector<int> cand;
    std::vector<int> tmp;
    bool have = false;
    for (int li : lits_of_var_[z]) {
      const BoundLiteral& lit = q_.literals[li];
      if (lit.is_clause || lit.atoms[0].negated) continue;
      const BoundAtom& a = lit.atoms[0];
      const bool z0 = a.arg0.is_var && a.arg0.index == z;
      const bool z1 = a.arg1.is_var && a.arg1.index == z;
      const std::vector<int>* src = nullptr;
      if (z0 && z1) {
        tmp.clear();
        for (int e : g_.heads_of(a.relation))
          if (g_.contains_fact(a.relation, e, e)) tmp.push_back(e);
        src = &tmp;
      } else if (z0) {
        const int other = ground_value(a.arg1);
        src = other >= 0 ? &g_.heads(a.relation, other) : &g_.heads_of(a.relation);
      } else {
        const int other = ground_value(a.arg0);
        src = other >= 0 ? &g_.tails(a.relation, other) : &g_.tails_of(a.relation);
      }
      if (!have) {
        cand = *src;
        have = true;
      } else {
        intersect_sorted(cand, *src);
      }
      if (cand.empty() && have) return cand;
    }
    if (!have) {
      cand.resize(g_.num_entities());
      std::iota(cand.begin(), cand.end(), 0);
    }
    return cand;
  }

  // Unassigned variable in [lo, hi) with the fewest candidates, lowest index
  // on ties; candidates move into `cands`. Returns -1 when none left.
  int pick_var(int lo, int hi, std::vector<int>& cands) {
    int best = -1;
    std::vector<int> best_c;
    for (int z = lo; z < hi; ++z) {
      if (assign_[z] >= 0) continue;
      std::vector<int> c = candidates_for(z);
      if (best < 0 || c.size() < best_c.size()) {
        best = z;
        best_c = std::move(c);
      }
    }
    cands = std::move(best_c);
    return best;
  }

  // Binds z := e, re-checking every literal that just became ground; calls
  // cont on success and restores state either way.
  template <typename Fn>
  bool with_assignment(int z, int e, Fn&& cont) {
    if (!tick()) return false;
    assign_[z] = e;
    for (int li : lits_of_var_[z]) --unbound_[li];
    bool ok = true;
    for (int li : lits_of_var_[z])
      if (unbound_[li] == 0 && !literal_holds(q_.literals[li])) {
        ok = false;
        break;
      }
    const bool found = ok && cont();
    for (int li : lits_of_var_[z]) ++unbound_[li];
    assign_[z] = -1;
    return found;
  }

  bool exists_check(int done) {
    if (stop()) return false;
    if (done == q_.num_vars()) return true;
    std::vector<int> cands;
    const int z = pick_var(q_.num_free, q_.num_vars(), cands);
    for (int e : cands) {
      if (with_assignment(z, e, [&] { return exists_check(done + 1); })) return true;
      if (stop()) return false;
    }
    return false;
  }

  void enum_free(int done) {
    if (stop()) return;
    if (done == q_.num_free) {
      if (exists_check(q_.num_free)) {
        res_.satisfiable = true;
        if (cfg_.mode != OracleMode::Boolean)
          res_.answers.emplace_back(assign_.begin(), assign_.begin() + q_.num_free);
        if (cfg_.mode != OracleMode::AllAnswers) mode_stop_ = true;
      }
      return;
    }
    std::vector<int> cands;
    const int z = pick_var(0, q_.num_free, cands);
    for (int e : cands) {
      with_assignment(z, e, [&] {
        enum_free(done + 1);
        return false;
      });
      if (stop()) return;
    }
  }

  // Free variables [0, seed size) pinned positionally to the seed tuple.
  void apply_seed(std::size_t i) {
    const auto& seed = *seed_;
    if (i == seed.size()) {
      enum_free(static_cast<int>(i));
      return;
    }
    const int e = seed[i];
    if (e < 0 || e >= g_.num_entities()) return;
    with_assignment(static_cast<int>(i), e, [&] {
      apply_seed(i + 1);
      return false;
    });
  }

  const BoundQuery& q_;
  const KnowledgeGraph& g_;
  const OracleConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  OracleResult res_;
  std::vector<int> assign_;
  std::vector<std::vector<int>> lits_of_var_;
  std::vector<int> unbound_;
  const std::vector<int>* seed_ = nullptr;
  bool truncated_ = false;
  bool mode_stop_ = false;
};

}  // namespace

OracleResult oracle_solve(const BoundQuery& q, const KnowledgeGraph& g,
                          const OracleConfig& cfg) {
  return Solver(q, g, cfg).run();
}

OracleResult oracle_solve(const ConjunctiveQuery& q, const KnowledgeGraph& g,
                          const OracleConfig& cfg) {
  return oracle_solve(bind(q, g), g, cfg);
}

bool oracle_verifies(const DNFQuery& q, const std::vector<std::string>& tuple,
                     const KnowledgeGraph& g, double timeout_sec) {
  OracleConfig cfg;
  cfg.mode = OracleMode::Boolean;
  cfg.timeout_sec = timeout_sec;
  for (const ConjunctiveQuery& d : q.disjuncts) {
    if (oracle_solve(ground(d, tuple), g, cfg).satisfiable) return true;
  }
  return false;
}

}  // namespace anycq
