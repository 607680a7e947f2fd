#include "anycq/search.hpp"

#include <chrono>
#include <utility>

#include "anycq/errors.hpp"
#include "anycq/fuzzy.hpp"
#include "anycq/rng.hpp"

namespace anycq {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

SearchResult run_search(const PolicyParameters& params, const BoundQuery& q,
                        const KnowledgeGraph& g, const LinkPredictor& pi,
                        const SearchConfig& cfg) {
  if (q.num_free != 0) throw DataError("run_search requires a Boolean query");
  if (cfg.steps < 0) throw DataError("negative step count");
  const auto start = std::chrono::steady_clock::now();

  CompGraph cg(q, g.num_entities());
  cg.set_pe(cfg.pe_mode, &pi, &g);
  const int num_vars = cg.num_vars();
  const int num_entities = cg.num_entities();

  Rng rng(cfg.seed);
  std::vector<int> alpha(num_vars);
  for (int z = 0; z < num_vars; ++z) alpha[z] = static_cast<int>(uniform_index(rng, num_entities));

  SearchResult res;
  res.score = assignment_score(pi, cg.query(), alpha);
  res.best_assignment = alpha;
  res.step_scores.push_back(res.score);

  std::vector<float> h(static_cast<std::size_t>(cg.num_value_vertices()) * params.d);
  for (int v = 0; v < cg.num_value_vertices(); ++v)
    for (int k = 0; k < params.d; ++k) h[static_cast<std::size_t>(v) * params.d + k] = params.h_init[k];

  std::vector<std::uint8_t> le;
  cg.compute_le(pi, alpha, le);

  StepTape tape;
  std::vector<double> mu;
  std::vector<int> next(num_vars);
  std::vector<int> changed;
  for (int t = 1; t <= cfg.steps; ++t) {
    if (cfg.timeout_sec > 0 && seconds_since(start) >= cfg.timeout_sec) {
      res.timed_out = true;
      break;
    }
    const auto step_start = std::chrono::steady_clock::now();
    policy_forward(params, cg, alpha, le, h, tape, mu);
    sample_assignment(mu, num_vars, num_entities, rng, next);
    changed.clear();
    for (int z = 0; z < num_vars; ++z)
      if (next[z] != alpha[z]) changed.push_back(z);
    alpha = next;
    const double s = assignment_score(pi, cg.query(), alpha);
    res.step_scores.push_back(s);
    if (s > res.score) {
      res.score = s;
      res.best_assignment = alpha;
    }
    cg.update_le(pi, alpha, changed, le);
    res.step_seconds.push_back(seconds_since(step_start));
    res.steps_run = t;
  }
  res.wall_time_sec = seconds_since(start);
  return res;
}

bool solve_qac(const PolicyParameters& params, const DNFQuery& q,
               const std::vector<std::string>& answer, const KnowledgeGraph& g,
               const LinkPredictor& pi, const SearchConfig& cfg) {
  for (std::size_t j = 0; j < q.disjuncts.size(); ++j) {
    ConjunctiveQuery grounded = ground(q.disjuncts[j], answer);
    BoundQuery bq = bind(grounded, g);
    SearchConfig c = cfg;
    c.seed = derive_rng(cfg.seed, j)();
    if (run_search(params, bq, g, pi, c).score > 0.5) return true;
  }
  return false;
}

QarAnswer solve_qar(const PolicyParameters& params, const DNFQuery& q,
                    const KnowledgeGraph& g, const LinkPredictor& pi,
                    const SearchConfig& cfg) {
  const int arity = static_cast<int>(q.free_vars().size());
  QarAnswer ans;
  std::vector<int> best_assignment;
  for (std::size_t j = 0; j < q.disjuncts.size(); ++j) {
    ConjunctiveQuery closed = existentially_close(q.disjuncts[j]);
    BoundQuery bq = bind(closed, g);
    SearchConfig c = cfg;
    c.seed = derive_rng(cfg.seed, j)();
    SearchResult r = run_search(params, bq, g, pi, c);
    if (ans.disjunct < 0 || r.score > ans.score) {
      ans.score = r.score;
      ans.disjunct = static_cast<int>(j);
      best_assignment = std::move(r.best_assignment);
    }
  }
  if (ans.disjunct < 0 || ans.score <= 0.5) {
    ans.found = false;
    return ans;
  }
  ans.found = true;
  const int num_vars = static_cast<int>(best_assignment.size());
  for (int k = num_vars - arity; k < num_vars; ++k) {
    ans.tuple_ids.push_back(best_assignment[k]);
    ans.tuple.push_back(g.entity_name(best_assignment[k]));
  }
  return ans;
}

}  // namespace anycq
