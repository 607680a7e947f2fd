#include "anycq/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "anycq/bound_query.hpp"
#include "anycq/errors.hpp"
#include "anycq/fuzzy.hpp"

namespace anycq {

namespace {

Term fvar() { return {Term::Kind::FreeVar, "x1"}; }
Term evar(int i) { return {Term::Kind::ExistVar, "y" + std::to_string(i)}; }
Term cterm(const KnowledgeGraph& g, int e) { return {Term::Kind::Constant, g.entity_name(e)}; }

Literal atom(const KnowledgeGraph& g, int r, Term a, Term b, bool neg = false) {
  Literal lit;
  lit.relation = g.relation_name(r);
  lit.args = {std::move(a), std::move(b)};
  lit.negated = neg;
  return lit;
}

ConjunctiveQuery with_exists(std::vector<std::string> exist, std::vector<Literal> lits) {
  ConjunctiveQuery q;
  q.free_vars = {"x1"};
  q.exist_vars = std::move(exist);
  q.literals = std::move(lits);
  return q;
}

const Triple& uniform_fact(const KnowledgeGraph& g, Rng& rng) {
  return g.facts()[uniform_index(rng, g.num_facts())];
}

// (relation, head) of a uniformly drawn fact ending in `node`.
std::optional<std::pair<int, int>> pick_in(const KnowledgeGraph& g, int node, Rng& rng) {
  const auto& es = g.in_edges(node);
  if (es.empty()) return std::nullopt;
  return es[uniform_index(rng, es.size())];
}

// Out-edges of `node` passing `keep`, drawn uniformly.
template <typename Keep>
std::optional<std::pair<int, int>> pick_out_if(const KnowledgeGraph& g, int node, Rng& rng,
                                               Keep&& keep) {
  std::vector<std::pair<int, int>> pool;
  for (const auto& e : g.out_edges(node))
    if (keep(e)) pool.push_back(e);
  if (pool.empty()) return std::nullopt;
  return pool[uniform_index(rng, pool.size())];
}

// Entities other than `self`, drawn uniformly from a sorted candidate list.
std::optional<int> pick_other(const std::vector<int>& sorted, int self, Rng& rng) {
  std::size_t n = sorted.size();
  if (std::binary_search(sorted.begin(), sorted.end(), self)) --n;
  if (n == 0) return std::nullopt;
  std::size_t k = uniform_index(rng, n);
  for (int e : sorted) {
    if (e == self) continue;
    if (k == 0) return e;
    --k;
  }
  return std::nullopt;
}

std::optional<ConjunctiveQuery> try_template(const KnowledgeGraph& g, const std::string& tag,
                                             Rng& rng) {
  if (tag == "1p") {
    const Triple f = uniform_fact(g, rng);
    return with_exists({}, {atom(g, f.rel, fvar(), cterm(g, f.tail))});
  }
  if (tag == "2p") {
    const Triple f2 = uniform_fact(g, rng);
    const auto e1 = pick_in(g, f2.head, rng);
    if (!e1) return std::nullopt;
    return with_exists({"y1"}, {atom(g, e1->first, fvar(), evar(1)),
                                atom(g, f2.rel, evar(1), cterm(g, f2.tail))});
  }
  if (tag == "3p") {
    const Triple f3 = uniform_fact(g, rng);
    const auto e2 = pick_in(g, f3.head, rng);
    if (!e2) return std::nullopt;
    const auto e1 = pick_in(g, e2->second, rng);
    if (!e1) return std::nullopt;
    return with_exists({"y1", "y2"}, {atom(g, e1->first, fvar(), evar(1)),
                                      atom(g, e2->first, evar(1), evar(2)),
                                      atom(g, f3.rel, evar(2), cterm(g, f3.tail))});
  }
  if (tag == "2i" || tag == "3i") {
    const Triple f1 = uniform_fact(g, rng);
    std::vector<std::pair<int, int>> pool;
    for (const auto& e : g.out_edges(f1.head))
      if (e != std::pair<int, int>{f1.rel, f1.tail}) pool.push_back(e);
    const int extra = tag == "2i" ? 1 : 2;
    if (static_cast<int>(pool.size()) < extra) return std::nullopt;
    std::vector<Literal> lits = {atom(g, f1.rel, fvar(), cterm(g, f1.tail))};
    for (int k = 0; k < extra; ++k) {
      const std::size_t j =
          static_cast<std::size_t>(k) + uniform_index(rng, pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      lits.push_back(atom(g, pool[static_cast<std::size_t>(k)].first, fvar(),
                          cterm(g, pool[static_cast<std::size_t>(k)].second)));
    }
    return with_exists({}, std::move(lits));
  }
  if (tag == "pi") {
    const Triple f2 = uniform_fact(g, rng);
    const auto e1 = pick_in(g, f2.head, rng);
    if (!e1) return std::nullopt;
    const auto f3 = pick_out_if(g, e1->second, rng, [&](const std::pair<int, int>& e) {
      return e != std::pair<int, int>{e1->first, f2.head};
    });
    if (!f3) return std::nullopt;
    return with_exists({"y1"}, {atom(g, e1->first, fvar(), evar(1)),
                                atom(g, f2.rel, evar(1), cterm(g, f2.tail)),
                                atom(g, f3->first, fvar(), cterm(g, f3->second))});
  }
  if (tag == "ip") {
    const Triple f2 = uniform_fact(g, rng);
    const auto f3 = pick_out_if(g, f2.head, rng, [&](const std::pair<int, int>& e) {
      return e != std::pair<int, int>{f2.rel, f2.tail};
    });
    if (!f3) return std::nullopt;
    const auto e1 = pick_in(g, f2.head, rng);
    if (!e1) return std::nullopt;
    return with_exists({"y1"}, {atom(g, e1->first, fvar(), evar(1)),
                                atom(g, f2.rel, evar(1), cterm(g, f2.tail)),
                                atom(g, f3->first, evar(1), cterm(g, f3->second))});
  }
  if (tag == "2in") {
    const Triple f1 = uniform_fact(g, rng);
    const auto excluded = pick_other(g.heads(f1.rel, f1.tail), f1.head, rng);
    if (!excluded) return std::nullopt;
    const auto neg = pick_out_if(g, *excluded, rng, [&](const std::pair<int, int>& e) {
      return !g.contains_fact(e.first, f1.head, e.second);
    });
    if (!neg) return std::nullopt;
    return with_exists({}, {atom(g, f1.rel, fvar(), cterm(g, f1.tail)),
                            atom(g, neg->first, fvar(), cterm(g, neg->second), true)});
  }
  if (tag == "3in") {
    const Triple f1 = uniform_fact(g, rng);
    const auto f2 = pick_out_if(g, f1.head, rng, [&](const std::pair<int, int>& e) {
      return e != std::pair<int, int>{f1.rel, f1.tail};
    });
    if (!f2) return std::nullopt;
    std::vector<int> both;
    const auto& h1 = g.heads(f1.rel, f1.tail);
    const auto& h2 = g.heads(f2->first, f2->second);
    std::set_intersection(h1.begin(), h1.end(), h2.begin(), h2.end(), std::back_inserter(both));
    const auto excluded = pick_other(both, f1.head, rng);
    if (!excluded) return std::nullopt;
    const auto neg = pick_out_if(g, *excluded, rng, [&](const std::pair<int, int>& e) {
      return !g.contains_fact(e.first, f1.head, e.second);
    });
    if (!neg) return std::nullopt;
    return with_exists({}, {atom(g, f1.rel, fvar(), cterm(g, f1.tail)),
                            atom(g, f2->first, fvar(), cterm(g, f2->second)),
                            atom(g, neg->first, fvar(), cterm(g, neg->second), true)});
  }
  if (tag == "inp") {
    const Triple f2 = uniform_fact(g, rng);
    const auto e1 = pick_in(g, f2.head, rng);
    if (!e1) return std::nullopt;
    const auto other_witness = pick_other(g.heads(f2.rel, f2.tail), f2.head, rng);
    if (!other_witness) return std::nullopt;
    const auto neg = pick_out_if(g, *other_witness, rng, [&](const std::pair<int, int>& e) {
      return !g.contains_fact(e.first, f2.head, e.second);
    });
    if (!neg) return std::nullopt;
    return with_exists({"y1"}, {atom(g, e1->first, fvar(), evar(1)),
                                atom(g, f2.rel, evar(1), cterm(g, f2.tail)),
                                atom(g, neg->first, evar(1), cterm(g, neg->second), true)});
  }
  if (tag == "pin") {
    const Triple f2 = uniform_fact(g, rng);
    const auto e1 = pick_in(g, f2.head, rng);
    if (!e1) return std::nullopt;
    std::unordered_set<int> seen;
    std::vector<int> positive_answers;
    for (int witness : g.heads(f2.rel, f2.tail))
      for (int a : g.heads(e1->first, witness))
        if (seen.insert(a).second) positive_answers.push_back(a);
    std::sort(positive_answers.begin(), positive_answers.end());
    const auto excluded = pick_other(positive_answers, e1->second, rng);
    if (!excluded) return std::nullopt;
    const auto neg = pick_out_if(g, *excluded, rng, [&](const std::pair<int, int>& e) {
      return !g.contains_fact(e.first, e1->second, e.second);
    });
    if (!neg) return std::nullopt;
    return with_exists({"y1"}, {atom(g, e1->first, fvar(), evar(1)),
                                atom(g, f2.rel, evar(1), cterm(g, f2.tail)),
                                atom(g, neg->first, fvar(), cterm(g, neg->second), true)});
  }
  throw DataError("unknown training query type: " + tag);
}

}  // namespace

ConjunctiveQuery sample_training_query(const KnowledgeGraph& g_train,
                                       const std::string& type_tag, Rng& rng) {
  if (g_train.num_facts() == 0) throw DataError("cannot sample queries from an empty graph");
  for (int attempt = 0; attempt < 200; ++attempt) {
    auto q = try_template(g_train, type_tag, rng);
    if (q) return std::move(*q);
  }
  throw DataError("training graph too sparse for query type " + type_tag);
}

Episode run_episode(const PolicyParameters& params, const ConjunctiveQuery& query,
                    const KnowledgeGraph& g_train, const LinkPredictor& pi_train,
                    const TrainConfig& cfg, Rng& rng) {
  if (cfg.t_train < 1) throw DataError("T_train must be at least 1");
  Episode ep{query,
             CompGraph(bind(existentially_close(query), g_train), g_train.num_entities()),
             {},
             {},
             {},
             {},
             {},
             0.0};
  ep.cg.set_pe(cfg.pe_mode, &pi_train, &g_train);
  const int num_vars = ep.cg.num_vars();
  const int num_entities = ep.cg.num_entities();

  std::vector<int> alpha(num_vars);
  for (int z = 0; z < num_vars; ++z) alpha[z] = static_cast<int>(uniform_index(rng, num_entities));
  ep.assignments.push_back(alpha);
  ep.scores.push_back(assignment_score(pi_train, ep.cg.query(), alpha));
  ep.best_score = ep.scores[0];

  std::vector<float> h(static_cast<std::size_t>(ep.cg.num_value_vertices()) * params.d);
  for (int v = 0; v < ep.cg.num_value_vertices(); ++v)
    for (int k = 0; k < params.d; ++k)
      h[static_cast<std::size_t>(v) * params.d + k] = params.h_init[k];
  std::vector<std::uint8_t> le;
  ep.cg.compute_le(pi_train, alpha, le);

  std::vector<double> mu;
  std::vector<int> next(num_vars);
  std::vector<int> changed;
  for (int t = 1; t <= cfg.t_train; ++t) {
    ep.tapes.emplace_back();
    policy_forward(params, ep.cg, alpha, le, h, ep.tapes.back(), mu);
    ep.log_probs.push_back(sample_assignment(mu, num_vars, num_entities, rng, next));
    changed.clear();
    for (int z = 0; z < num_vars; ++z)
      if (next[z] != alpha[z]) changed.push_back(z);
    alpha = next;
    ep.assignments.push_back(alpha);
    const double s = assignment_score(pi_train, ep.cg.query(), alpha);
    ep.scores.push_back(s);
    ep.rewards.push_back(std::max(0.0, s - ep.best_score));
    ep.best_score = std::max(ep.best_score, s);
    ep.cg.update_le(pi_train, alpha, changed, le);
  }
  return ep;
}

AdamState make_adam_state(const PolicyParameters& p) {
  AdamState st;
  for_each_tensor(const_cast<PolicyParameters&>(p), [&](std::vector<float>& t) {
    st.m.emplace_back(t.size(), 0.0f);
    st.v.emplace_back(t.size(), 0.0f);
  });
  return st;
}

namespace {

// Loss and per-step gradient coefficients shared by the live update and the
// finite-difference reference: coeff_s = -gamma^(s-1) G_(s-1) with
// G_i = sum_{t>i} gamma^(t-i-1) R^(t).
double objective(const std::vector<double>& log_probs, const std::vector<double>& rewards,
                 double gamma, std::vector<double>* coeffs) {
  const int t_max = static_cast<int>(log_probs.size());
  std::vector<double> g(static_cast<std::size_t>(t_max) + 1, 0.0);
  for (int i = t_max - 1; i >= 0; --i)
    g[static_cast<std::size_t>(i)] = rewards[static_cast<std::size_t>(i)] +
                                     gamma * g[static_cast<std::size_t>(i) + 1];
  double loss = 0.0;
  double discount = 1.0;
  if (coeffs) coeffs->assign(static_cast<std::size_t>(t_max), 0.0);
  for (int i = 0; i < t_max; ++i) {
    loss -= discount * log_probs[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
    if (coeffs) (*coeffs)[static_cast<std::size_t>(i)] = -discount * g[static_cast<std::size_t>(i)];
    discount *= gamma;
  }
  return loss;
}

void accumulate_episode_grad(const PolicyParameters& params, const Episode& ep,
                             const std::vector<double>& coeffs, PolicyGrad& grad) {
  const int t_max = static_cast<int>(ep.tapes.size());
  std::vector<float> dh(static_cast<std::size_t>(ep.cg.num_value_vertices()) * params.d, 0.0f);
  for (int s = t_max; s >= 1; --s)
    policy_backward(params, ep.cg, ep.tapes[static_cast<std::size_t>(s - 1)],
                    coeffs[static_cast<std::size_t>(s - 1)],
                    ep.assignments[static_cast<std::size_t>(s)], dh, grad);
  const int d = params.d;
  for (int v = 0; v < ep.cg.num_value_vertices(); ++v)
    for (int k = 0; k < d; ++k)
      grad.g.h_init[static_cast<std::size_t>(k)] += dh[static_cast<std::size_t>(v) * d + k];
}

std::vector<std::vector<float>*> tensor_ptrs(PolicyParameters& p) {
  std::vector<std::vector<float>*> out;
  for_each_tensor(p, [&](std::vector<float>& t) { out.push_back(&t); });
  return out;
}

}  // namespace

double reinforce_update(PolicyParameters& params, const std::vector<Episode>& episodes,
                        const TrainConfig& cfg, AdamState& adam) {
  if (episodes.empty()) throw DataError("empty episode batch");
  PolicyGrad grad(params);
  grad.zero();
  double loss = 0.0;
  std::vector<double> coeffs;
  for (const Episode& ep : episodes) {
    loss += objective(ep.log_probs, ep.rewards, cfg.gamma, &coeffs);
    accumulate_episode_grad(params, ep, coeffs, grad);
  }
  loss /= static_cast<double>(episodes.size());
  const float scale = 1.0f / static_cast<float>(episodes.size());

  const auto gs = tensor_ptrs(grad.g);
  for (std::size_t i = 0; i < gs.size(); ++i)
    for (float& x : *gs[i]) {
      x *= scale;
      if (!std::isfinite(x))
        throw DataError("non-finite gradient in tensor " + std::to_string(i) +
                        " at Adam step " + std::to_string(adam.step + 1));
    }

  adam.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
  const auto ps = tensor_ptrs(params);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::vector<float>& p = *ps[i];
    std::vector<float>& m = adam.m[i];
    std::vector<float>& v = adam.v[i];
    const std::vector<float>& g = *gs[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = static_cast<float>(cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k]);
      v[k] = static_cast<float>(cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k]);
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
  return loss;
}

PolicyParameters train(const KnowledgeGraph& g_train, const TrainConfig& cfg,
                       PolicyParameters params, std::ostream* metrics_out) {
  if (cfg.mix.empty()) throw DataError("empty training mix");
  if (cfg.batch_size < 1) throw DataError("batch size must be at least 1");
  const PerfectPredictor pi(g_train);
  AdamState adam = make_adam_state(params);
  const auto start = std::chrono::steady_clock::now();
  for (int b = cfg.start_batch; b < cfg.num_batches; ++b) {
    std::vector<Episode> episodes;
    double mean_best = 0.0;
    for (int e = 0; e < cfg.batch_size; ++e) {
      Rng rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(b) *
                                             static_cast<std::uint64_t>(cfg.batch_size) +
                                         static_cast<std::uint64_t>(e));
      ConjunctiveQuery q;
      bool sampled = false;
      for (int attempt = 0; attempt < 50 && !sampled; ++attempt) {
        const std::string& tag = cfg.mix[uniform_index(rng, cfg.mix.size())];
        try {
          q = sample_training_query(g_train, tag, rng);
          sampled = true;
        } catch (const DataError&) {
          if (attempt + 1 == 50) throw;
        }
      }
      episodes.push_back(run_episode(params, q, g_train, pi, cfg, rng));
      mean_best += episodes.back().best_score;
    }
    mean_best /= static_cast<double>(cfg.batch_size);
    const double loss = reinforce_update(params, episodes, cfg, adam);
    if (metrics_out && (cfg.log_every <= 1 || b % cfg.log_every == 0 || b + 1 == cfg.num_batches)) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      nlohmann::json j{{"batch", b},
                       {"loss", loss},
                       {"mean_best_score", mean_best},
                       {"wall_time", wall}};
      (*metrics_out) << j.dump() << '\n';
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
        (b + 1) % cfg.checkpoint_every == 0)
      save_policy_file(cfg.checkpoint_path, params);
  }
  return params;
}

namespace {

// Replays a fixed trajectory, returning log-probabilities, rewards, and the
// tapes when requested.
void replay_forced(const PolicyParameters& params, CompGraph& cg, const LinkPredictor& pi,
                   std::span<const std::vector<int>> assignments,
                   std::vector<double>& log_probs, std::vector<double>& rewards,
                   std::vector<StepTape>* tapes) {
  const int num_vars = cg.num_vars();
  const int num_entities = cg.num_entities();
  if (assignments.empty()) throw DataError("forced trajectory needs an initial assignment");
  for (const auto& a : assignments)
    if (static_cast<int>(a.size()) != num_vars)
      throw DataError("forced assignment arity mismatch");

  std::vector<float> h(static_cast<std::size_t>(cg.num_value_vertices()) * params.d);
  for (int v = 0; v < cg.num_value_vertices(); ++v)
    for (int k = 0; k < params.d; ++k)
      h[static_cast<std::size_t>(v) * params.d + k] = params.h_init[k];

  std::vector<std::uint8_t> le;
  cg.compute_le(pi, assignments[0], le);
  double best = assignment_score(pi, cg.query(), assignments[0]);

  log_probs.clear();
  rewards.clear();
  StepTape scratch;
  std::vector<double> mu;
  std::vector<int> changed;
  for (std::size_t t = 1; t < assignments.size(); ++t) {
    StepTape* tape = tapes ? &tapes->emplace_back() : &scratch;
    policy_forward(params, cg, assignments[t - 1], le, h, *tape, mu);
    log_probs.push_back(assignment_log_prob(mu, num_entities, assignments[t]));
    changed.clear();
    for (int z = 0; z < num_vars; ++z)
      if (assignments[t][static_cast<std::size_t>(z)] !=
          assignments[t - 1][static_cast<std::size_t>(z)])
        changed.push_back(z);
    const double s = assignment_score(pi, cg.query(), assignments[t]);
    rewards.push_back(std::max(0.0, s - best));
    best = std::max(best, s);
    cg.update_le(pi, assignments[t], changed, le);
  }
}

}  // namespace

double episode_loss_forced(const PolicyParameters& params, const BoundQuery& q,
                           const KnowledgeGraph& g, const LinkPredictor& pi, PEMode pe_mode,
                           std::span<const std::vector<int>> assignments, double gamma) {
  CompGraph cg(q, g.num_entities());
  cg.set_pe(pe_mode, &pi, &g);
  std::vector<double> log_probs, rewards;
  replay_forced(params, cg, pi, assignments, log_probs, rewards, nullptr);
  return objective(log_probs, rewards, gamma, nullptr);
}

PolicyGrad episode_grad_forced(const PolicyParameters& params, const BoundQuery& q,
                               const KnowledgeGraph& g, const LinkPredictor& pi,
                               PEMode pe_mode, std::span<const std::vector<int>> assignments,
                               double gamma) {
  CompGraph cg(q, g.num_entities());
  cg.set_pe(pe_mode, &pi, &g);
  std::vector<double> log_probs, rewards;
  std::vector<StepTape> tapes;
  replay_forced(params, cg, pi, assignments, log_probs, rewards, &tapes);
  std::vector<double> coeffs;
  objective(log_probs, rewards, gamma, &coeffs);

  PolicyGrad grad(params);
  grad.zero();
  std::vector<float> dh(static_cast<std::size_t>(cg.num_value_vertices()) * params.d, 0.0f);
  for (int s = static_cast<int>(tapes.size()); s >= 1; --s)
    policy_backward(params, cg, tapes[static_cast<std::size_t>(s - 1)],
                    coeffs[static_cast<std::size_t>(s - 1)], assignments[static_cast<std::size_t>(s)],
                    dh, grad);
  for (int v = 0; v < cg.num_value_vertices(); ++v)
    for (int k = 0; k < params.d; ++k)
      grad.g.h_init[static_cast<std::size_t>(k)] += dh[static_cast<std::size_t>(v) * params.d + k];
  return grad;
}

}  // namespace anycq
