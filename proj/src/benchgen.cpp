#include "anycq/benchgen.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "anycq/errors.hpp"
#include "anycq/oracle.hpp"

namespace anycq {

namespace {

bool ident_name(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

bool constant_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '\0') return false;
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
        break;
    }
  }
  return true;
}

// Generated instances serialize queries through the grammar, so the
// vocabulary must survive a print/parse round trip.
void check_vocab(const KnowledgeGraph& g) {
  for (const auto& r : g.relation_names())
    if (!ident_name(r))
      throw DataError("relation name not expressible in the query grammar: " + r);
  for (const auto& e : g.entity_names())
    if (!constant_name(e))
      throw DataError("entity name not expressible in the query grammar: " + e);
}

// Nodes at distance 1 or 2 from v, sorted.
std::vector<int> within_two_hops(const KnowledgeGraph& g, int v) {
  std::vector<int> out;
  std::unordered_set<int> seen{v};
  for (int u : g.neighbors(v))
    if (seen.insert(u).second) out.push_back(u);
  const std::size_t one_hop = out.size();
  for (std::size_t i = 0; i < one_hop; ++i)
    for (int w : g.neighbors(out[i]))
      if (seen.insert(w).second) out.push_back(w);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> sample_without_replacement(std::vector<int> pool, int k, Rng& rng) {
  for (int i = 0; i < k; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) + uniform_index(rng, pool.size() - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

// Facts of g with both endpoints in `nodes`, sorted like g.facts().
std::vector<Triple> restriction_facts(const KnowledgeGraph& g,
                                      const std::unordered_set<int>& nodes,
                                      const std::vector<int>& sorted_nodes) {
  std::vector<Triple> out;
  for (int a : sorted_nodes)
    for (const auto& [r, b] : g.out_edges(a))
      if (nodes.count(b)) out.push_back({r, a, b});
  std::sort(out.begin(), out.end());
  return out;
}

// Multigraph degrees: one per incident fact, self-loops counting twice.
std::unordered_map<int, int> multigraph_degrees(const std::vector<Triple>& facts) {
  std::unordered_map<int, int> deg;
  for (const Triple& t : facts) {
    ++deg[t.head];
    ++deg[t.tail];
  }
  return deg;
}

bool restriction_connected(const std::vector<int>& nodes, const std::vector<Triple>& facts) {
  if (nodes.size() <= 1) return true;
  std::unordered_map<int, int> idx;
  for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i]] = static_cast<int>(i);
  std::vector<int> parent(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Triple& t : facts) parent[find(idx[t.head])] = find(idx[t.tail]);
  const int root = find(0);
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (find(static_cast<int>(i)) != root) return false;
  return true;
}

}  // namespace

GenParams gen_preset(const std::string& name) {
  std::string key;
  for (char c : name)
    if (c != '-' && c != '_') key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  GenParams p;
  if (key == "3hub") {
    p.n_hub = 2;
    p.p_const = 0.6;
    p.p_out = 0.95;
  } else if (key == "4hub") {
    p.n_hub = 3;
    p.p_const = 0.8;
    p.p_out = 0.97;
  } else if (key == "5hub") {
    p.n_hub = 4;
    p.p_const = 1.0;
    p.p_out = 0.99;
  } else {
    throw DataError("unknown generation preset: " + name);
  }
  return p;
}

ConjunctiveQuery sample_base_query(const KnowledgeGraph& g, const KnowledgeGraph& g_tilde,
                                   const GenParams& params, Rng& rng, GenStats* stats) {
  if (params.n_hub < 1 || params.n_min < 0 || params.p_const < 0 || params.p_const > 1 ||
      params.p_out < 0 || params.p_out > 1)
    throw DataError("invalid generation parameters");
  if (g_tilde.num_entities() == 0 || g_tilde.num_facts() == 0)
    throw DataError("cannot sample queries from an empty graph");
  if (!g.is_subgraph_of(g_tilde))
    throw DataError("observable graph is not a subgraph of the complete graph");

  GenStats local;
  GenStats& st = stats ? *stats : local;
  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    const int v = static_cast<int>(uniform_index(rng, g_tilde.num_entities()));

    std::vector<int> n2 = within_two_hops(g_tilde, v);
    if (static_cast<int>(n2.size()) < params.n_hub) {
      ++st.restarts;
      if (++st.hub_shortfalls > params.max_hub_retries)
        throw DataError("generation failed: 2-hop neighborhoods keep falling short of n_hub");
      continue;
    }
    const std::vector<int> hubs = sample_without_replacement(std::move(n2), params.n_hub, rng);

    std::vector<int> seeds = hubs;
    seeds.push_back(v);
    std::unordered_set<int> dset;
    for (int w : seeds) {
      dset.insert(w);
      for (int u : g_tilde.neighbors(w)) dset.insert(u);
    }

    std::vector<int> dsorted(dset.begin(), dset.end());
    std::sort(dsorted.begin(), dsorted.end());
    const std::vector<Triple> dfacts = restriction_facts(g_tilde, dset, dsorted);
    std::unordered_map<int, int> ddeg = multigraph_degrees(dfacts);
    for (int w : dsorted)
      if (ddeg[w] == 1 && uniform_double(rng) < params.p_out) dset.erase(w);

    const std::unordered_set<int> pset(seeds.begin(), seeds.end());
    std::vector<int> pool;
    for (int w : dsorted)
      if (dset.count(w) && !pset.count(w)) pool.push_back(w);
    if (static_cast<int>(pool.size()) < params.n_min) {
      ++st.restarts;
      ++st.growth_dead_ends;
      continue;
    }

    std::unordered_set<int> pprime = pset;
    bool dead = false;
    for (int k = 0; k < params.n_min; ++k) {
      std::vector<int> cands;
      for (int w : pool) {
        if (pprime.count(w)) continue;
        for (int u : g_tilde.neighbors(w)) {
          if (pprime.count(u)) {
            cands.push_back(w);
            break;
          }
        }
      }
      if (cands.empty()) {
        dead = true;
        break;
      }
      pprime.insert(cands[uniform_index(rng, cands.size())]);
    }
    if (dead) {
      ++st.restarts;
      ++st.growth_dead_ends;
      continue;
    }

    std::vector<int> pnodes(pprime.begin(), pprime.end());
    std::sort(pnodes.begin(), pnodes.end());
    const std::vector<Triple> pfacts = restriction_facts(g_tilde, pprime, pnodes);
    if (!restriction_connected(pnodes, pfacts)) {
      ++st.restarts;
      ++st.growth_dead_ends;
      continue;
    }

    bool all_observed = true;
    for (const Triple& t : pfacts)
      if (!g.contains_fact(t.rel, t.head, t.tail)) {
        all_observed = false;
        break;
      }
    if (all_observed) {
      ++st.restarts;
      ++st.observable_rejections;
      continue;
    }

    std::unordered_map<int, int> pdeg = multigraph_degrees(pfacts);
    std::unordered_set<int> const_nodes;
    for (int w : pnodes) {
      if (pset.count(w)) continue;
      const double d = static_cast<double>(pdeg[w]);
      if (uniform_double(rng) < params.p_const / (d * d)) const_nodes.insert(w);
    }

    ConjunctiveQuery q;
    q.free_vars = {"x1"};
    std::unordered_map<int, std::string> var_name;
    var_name[v] = "x1";
    int next_y = 1;
    for (const Triple& t : pfacts) {
      Literal lit;
      lit.relation = g_tilde.relation_name(t.rel);
      lit.args.resize(2);
      for (int side = 0; side < 2; ++side) {
        const int node = side == 0 ? t.head : t.tail;
        Term& term = lit.args[side];
        if (node == v) {
          term.kind = Term::Kind::FreeVar;
          term.name = "x1";
        } else if (const_nodes.count(node)) {
          term.kind = Term::Kind::Constant;
          term.name = g_tilde.entity_name(node);
        } else {
          term.kind = Term::Kind::ExistVar;
          auto it = var_name.find(node);
          if (it == var_name.end()) {
            term.name = "y" + std::to_string(next_y++);
            var_name.emplace(node, term.name);
            q.exist_vars.push_back(term.name);
          } else {
            term.name = it->second;
          }
        }
      }
      q.literals.push_back(std::move(lit));
    }
    return q;
  }
  throw DataError("query generation exhausted its retry budget (restarts: " +
                  std::to_string(st.restarts) + ", observable rejections: " +
                  std::to_string(st.observable_rejections) + ", dead ends: " +
                  std::to_string(st.growth_dead_ends) + ")");
}

std::optional<QACInstance> try_make_qac_instance(const ConjunctiveQuery& q,
                                                 const KnowledgeGraph& g,
                                                 const KnowledgeGraph& g_tilde, Rng& rng,
                                                 double oracle_timeout_sec) {
  if (q.free_vars.size() != 1)
    throw DataError("QAC instances need exactly one free variable");
  OracleConfig cfg;
  cfg.mode = OracleMode::AllAnswers;
  cfg.timeout_sec = oracle_timeout_sec;
  const OracleResult full = oracle_solve(q, g_tilde, cfg);
  if (!full.exhausted || full.answers.empty()) return std::nullopt;
  const OracleResult obs = oracle_solve(q, g, cfg);
  if (!obs.exhausted) return std::nullopt;

  std::unordered_set<int> easy;
  for (const auto& t : obs.answers) easy.insert(t[0]);
  std::vector<int> answers;
  answers.reserve(full.answers.size());
  bool any_hard = false;
  for (const auto& t : full.answers) {
    answers.push_back(t[0]);
    if (!easy.count(t[0])) any_hard = true;
  }
  if (!any_hard) return std::nullopt;

  const int total = static_cast<int>(answers.size());
  const int num_non = g.num_entities() - total;
  const int n = std::min({std::clamp(total, 5, 10), total, num_non});
  if (n <= 0) return std::nullopt;

  std::vector<double> weights(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i)
    weights[i] = easy.count(answers[i]) ? 1.0 : 2.0;
  std::vector<int> chosen;
  for (int k = 0; k < n; ++k) {
    const std::size_t i = weighted_index(rng, weights);
    chosen.push_back(answers[i]);
    weights[i] = 0.0;
  }
  std::sort(chosen.begin(), chosen.end());

  const std::unordered_set<int> answer_set(answers.begin(), answers.end());
  std::vector<int> non;
  non.reserve(static_cast<std::size_t>(num_non));
  for (int e = 0; e < g.num_entities(); ++e)
    if (!answer_set.count(e)) non.push_back(e);
  std::vector<int> wrong = sample_without_replacement(std::move(non), n, rng);
  std::sort(wrong.begin(), wrong.end());

  QACInstance inst;
  inst.query.disjuncts = {q};
  for (int c : chosen) {
    inst.correct.push_back(g.entity_name(c));
    if (!easy.count(c)) inst.hard.push_back(g.entity_name(c));
  }
  for (int w : wrong) inst.wrong.push_back(g.entity_name(w));

  for (const std::string& c : inst.correct)
    if (!oracle_verifies(inst.query, {c}, g_tilde, oracle_timeout_sec))
      throw DataError("generation self-check failed: correct candidate " + c + " rejected");
  for (const std::string& w : inst.wrong)
    if (oracle_verifies(inst.query, {w}, g_tilde, oracle_timeout_sec))
      throw DataError("generation self-check failed: wrong candidate " + w + " accepted");
  std::unordered_set<std::string> hard_set(inst.hard.begin(), inst.hard.end());
  for (const std::string& c : inst.correct)
    if (oracle_verifies(inst.query, {c}, g, oracle_timeout_sec) == hard_set.count(c))
      throw DataError("generation self-check failed: easy/hard flag of " + c);
  return inst;
}

std::optional<QARInstance> try_make_qar_instance(const ConjunctiveQuery& q,
                                                 const KnowledgeGraph& g,
                                                 const KnowledgeGraph& g_tilde,
                                                 double oracle_timeout_sec) {
  OracleConfig cfg;
  cfg.mode = OracleMode::AllAnswers;
  cfg.timeout_sec = oracle_timeout_sec;
  const OracleResult full = oracle_solve(q, g_tilde, cfg);
  if (!full.exhausted || full.answers.empty()) return std::nullopt;
  const OracleResult obs = oracle_solve(q, g, cfg);
  if (!obs.exhausted) return std::nullopt;
  if (obs.answers.size() == full.answers.size()) return std::nullopt;  // no hard answer

  QARInstance inst;
  inst.query.disjuncts = {q};
  for (const auto& tuple : full.answers) {
    std::vector<std::string> names;
    for (int e : tuple) names.push_back(g_tilde.entity_name(e));
    inst.answers.push_back(std::move(names));
  }
  inst.has_trivial = !obs.answers.empty();
  return inst;
}

std::optional<QARInstance> try_lift_arity(const QARInstance& inst, Rng& rng,
                                          const KnowledgeGraph& g,
                                          const KnowledgeGraph& g_tilde,
                                          double oracle_timeout_sec) {
  if (inst.query.disjuncts.size() != 1)
    throw DataError("arity lifting requires a single-disjunct query");
  ConjunctiveQuery q = inst.query.disjuncts[0];
  if (q.exist_vars.empty())
    throw DataError("arity lifting requires an existential variable");
  const std::size_t k = uniform_index(rng, q.exist_vars.size());
  const std::string promoted = q.exist_vars[k];
  q.free_vars.push_back(promoted);
  q.exist_vars.erase(q.exist_vars.begin() + static_cast<std::ptrdiff_t>(k));
  const auto promote = [&](Term& t) {
    if (t.kind == Term::Kind::ExistVar && t.name == promoted) t.kind = Term::Kind::FreeVar;
  };
  for (Literal& lit : q.literals) {
    for (Term& t : lit.args) promote(t);
    for (Literal& atom : lit.clause)
      for (Term& t : atom.args) promote(t);
  }

  OracleConfig cfg;
  cfg.mode = OracleMode::AllAnswers;
  cfg.timeout_sec = oracle_timeout_sec;
  for (const auto& tuple : inst.answers) {
    std::vector<int> ids;
    for (const std::string& name : tuple) {
      const auto id = g_tilde.entity_id(name);
      if (!id) throw DataError("answer entity unknown to the graph: " + name);
      ids.push_back(*id);
    }
    cfg.seed_answers.push_back(std::move(ids));
  }
  const OracleResult full = oracle_solve(q, g_tilde, cfg);
  if (!full.exhausted || full.answers.empty()) return std::nullopt;

  OracleConfig bool_cfg;
  bool_cfg.mode = OracleMode::Boolean;
  bool_cfg.timeout_sec = oracle_timeout_sec;
  const OracleResult trivial = oracle_solve(q, g, bool_cfg);
  if (!trivial.exhausted) return std::nullopt;

  QARInstance out;
  out.query.disjuncts = {std::move(q)};
  for (const auto& tuple : full.answers) {
    std::vector<std::string> names;
    for (int e : tuple) names.push_back(g_tilde.entity_name(e));
    out.answers.push_back(std::move(names));
  }
  out.has_trivial = trivial.satisfiable;
  return out;
}

namespace {

std::string stall_report(const char* task, int instance, const GenStats& st) {
  return std::string(task) + " generation stalled on instance " + std::to_string(instance) +
         " (restarts=" + std::to_string(st.restarts) +
         ", hub_shortfalls=" + std::to_string(st.hub_shortfalls) +
         ", observable_rejections=" + std::to_string(st.observable_rejections) +
         ", growth_dead_ends=" + std::to_string(st.growth_dead_ends) +
         ", candidate_rejections=" + std::to_string(st.candidate_rejections) + ")";
}

}  // namespace

std::vector<QACInstance> generate_qac(const KnowledgeGraph& g, const KnowledgeGraph& g_tilde,
                                      const GenParams& params, int count,
                                      std::uint64_t seed, GenStats* stats) {
  check_vocab(g_tilde);
  GenStats st;
  std::vector<QACInstance> out;
  for (int i = 0; i < count; ++i) {
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(i));
    bool done = false;
    for (int attempt = 0; attempt < params.max_retries && !done; ++attempt) {
      const ConjunctiveQuery q = sample_base_query(g, g_tilde, params, rng, &st);
      auto inst = try_make_qac_instance(q, g, g_tilde, rng, params.oracle_timeout_sec);
      if (inst) {
        out.push_back(std::move(*inst));
        done = true;
      } else {
        ++st.candidate_rejections;
      }
    }
    if (stats) *stats = st;
    if (!done) throw DataError(stall_report("QAC", i, st));
  }
  if (stats) *stats = st;
  return out;
}

std::vector<QARInstance> generate_qar(const KnowledgeGraph& g, const KnowledgeGraph& g_tilde,
                                      const GenParams& params, int count, int arity,
                                      std::uint64_t seed, GenStats* stats) {
  if (arity < 1 || arity > 3) throw DataError("QAR arity must be 1, 2 or 3");
  check_vocab(g_tilde);
  GenStats st;
  std::vector<QARInstance> out;
  for (int i = 0; i < count; ++i) {
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(i));
    bool done = false;
    for (int attempt = 0; attempt < params.max_retries && !done; ++attempt) {
      const ConjunctiveQuery q = sample_base_query(g, g_tilde, params, rng, &st);
      auto inst = try_make_qar_instance(q, g, g_tilde, params.oracle_timeout_sec);
      if (!inst) {
        ++st.candidate_rejections;
        continue;
      }
      bool ok = true;
      for (int a = 1; a < arity && ok; ++a) {
        if (inst->query.disjuncts[0].exist_vars.empty()) {
          ok = false;
          break;
        }
        auto lifted = try_lift_arity(*inst, rng, g, g_tilde, params.oracle_timeout_sec);
        if (!lifted) {
          ok = false;
          break;
        }
        inst = std::move(lifted);
      }
      if (ok) {
        out.push_back(std::move(*inst));
        done = true;
      } else {
        ++st.candidate_rejections;
      }
    }
    if (stats) *stats = st;
    if (!done) throw DataError(stall_report("QAR", i, st));
  }
  if (stats) *stats = st;
  return out;
}

}  // namespace anycq
