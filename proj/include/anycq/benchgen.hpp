#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anycq/instances.hpp"
#include "anycq/kg.hpp"
#include "anycq/query.hpp"
#include "anycq/rng.hpp"

namespace anycq {

struct GenParams {
  int n_hub = 2;
  int n_min = 15;
  double p_const = 0.6;
  double p_out = 0.95;
  int max_retries = 1000;       // full restarts per query
  int max_hub_retries = 100;    // too-small 2-hop neighborhood restarts
  double oracle_timeout_sec = 30.0;
};

// Named splits: "3hub" (2, 0.6, 0.95), "4hub" (3, 0.8, 0.97),
// "5hub" (4, 1.0, 0.99); dashes accepted. n_min keeps its default.
GenParams gen_preset(const std::string& name);

struct GenStats {
  int restarts = 0;        // returns to step 1
  int hub_shortfalls = 0;  // 2-hop neighborhood smaller than n_hub
  int observable_rejections = 0;
  int growth_dead_ends = 0;
  int candidate_rejections = 0;  // base query sampled but instance labeling failed
};

// One hub-sampled base query with free variable x1: an induced connected
// restriction of the complete graph around a pivot, with at least one edge
// missing from the observable graph. Throws DataError when the retry budget
// runs out.
ConjunctiveQuery sample_base_query(const KnowledgeGraph& g, const KnowledgeGraph& g_tilde,
                                   const GenParams& params, Rng& rng,
                                   GenStats* stats = nullptr);

// Candidate sets for a one-free-variable query: answers over the complete
// graph split into easy (already derivable in g) and hard. Rejections
// (timeout, no hard answer, no wrong candidate) return nullopt.
std::optional<QACInstance> try_make_qac_instance(const ConjunctiveQuery& q,
                                                 const KnowledgeGraph& g,
                                                 const KnowledgeGraph& g_tilde, Rng& rng,
                                                 double oracle_timeout_sec);

std::optional<QARInstance> try_make_qar_instance(const ConjunctiveQuery& q,
                                                 const KnowledgeGraph& g,
                                                 const KnowledgeGraph& g_tilde,
                                                 double oracle_timeout_sec);

// Promotes one uniformly chosen existential variable to a free variable
// (appended to the free list) and recomputes the answers, seeding the solver
// with the known lower-arity answers.
std::optional<QARInstance> try_lift_arity(const QARInstance& inst, Rng& rng,
                                          const KnowledgeGraph& g,
                                          const KnowledgeGraph& g_tilde,
                                          double oracle_timeout_sec);

// Deterministic instance streams; instance i only depends on (seed, i).
// Exhaustion errors carry the accumulated retry statistics, also written to
// `stats` when given.
std::vector<QACInstance> generate_qac(const KnowledgeGraph& g, const KnowledgeGraph& g_tilde,
                                      const GenParams& params, int count,
                                      std::uint64_t seed, GenStats* stats = nullptr);
std::vector<QARInstance> generate_qar(const KnowledgeGraph& g, const KnowledgeGraph& g_tilde,
                                      const GenParams& params, int count, int arity,
                                      std::uint64_t seed, GenStats* stats = nullptr);

}  // namespace anycq
