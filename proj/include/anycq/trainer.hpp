#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anycq/compgraph.hpp"
#include "anycq/kg.hpp"
#include "anycq/policy.hpp"
#include "anycq/predictor.hpp"
#include "anycq/query.hpp"
#include "anycq/rng.hpp"

namespace anycq {

struct TrainConfig {
  int t_train = 15;
  double gamma = 0.75;
  double lr = 5e-6;
  int batch_size = 4;
  int num_batches = 1000;
  int start_batch = 0;  // resume offset; batch b is deterministic in (seed, b)
  std::uint64_t seed = 0;
  PEMode pe_mode = PEMode::Exact;
  std::vector<std::string> mix = {"1p",  "2p",  "3p",  "2i", "3i",
                                  "2in", "3in", "pin", "inp"};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int log_every = 1;
  int checkpoint_every = 0;      // batches; 0 disables
  std::string checkpoint_path;  // overwritten on each checkpoint
};

// One training query instantiated from a fixed template family by walking
// backwards from sampled facts, so it always has a trivial answer. Negated
// atoms are chosen to keep that answer while excluding some other entity
// that satisfies the positive part. Throws DataError when the graph is too
// sparse for the template.
ConjunctiveQuery sample_training_query(const KnowledgeGraph& g_train,
                                       const std::string& type_tag, Rng& rng);

struct Episode {
  ConjunctiveQuery query;  // as sampled, one free variable
  CompGraph cg;            // of the existential closure
  std::vector<std::vector<int>> assignments;  // alpha^0 .. alpha^T
  std::vector<double> scores;                 // S^(0) .. S^(T)
  std::vector<double> log_probs;              // log P^(t), t = 1..T
  std::vector<double> rewards;                // R^(t), t = 1..T
  std::vector<StepTape> tapes;                // one per sampled step
  double best_score = 0.0;
};

// Closes the query, runs T_train policy steps against the training
// predictor, and records everything the update needs.
Episode run_episode(const PolicyParameters& params, const ConjunctiveQuery& query,
                    const KnowledgeGraph& g_train, const LinkPredictor& pi_train,
                    const TrainConfig& cfg, Rng& rng);

struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::int64_t step = 0;
};
AdamState make_adam_state(const PolicyParameters& p);

// Gradient of -sum_i gamma^i log P^(i+1) sum_{t>i} gamma^(t-i-1) R^(t),
// averaged over the batch and applied through Adam. Rewards are constants;
// only the log-probabilities carry gradient. Returns the batch loss; throws
// DataError on a non-finite gradient.
double reinforce_update(PolicyParameters& params, const std::vector<Episode>& episodes,
                        const TrainConfig& cfg, AdamState& adam);

// REINFORCE over template-sampled queries with the observed-graph perfect
// predictor. Writes one JSON line {batch, loss, mean_best_score, wall_time}
// per logged batch. Deterministic for a fixed config.
PolicyParameters train(const KnowledgeGraph& g_train, const TrainConfig& cfg,
                       PolicyParameters params, std::ostream* metrics_out);

// Loss and analytic gradient of the objective along a fixed trajectory
// alpha^0..alpha^T (rewards recomputed from the trajectory, constant in the
// parameters). Reference pair for finite-difference checks.
double episode_loss_forced(const PolicyParameters& params, const BoundQuery& q,
                           const KnowledgeGraph& g, const LinkPredictor& pi, PEMode pe_mode,
                           std::span<const std::vector<int>> assignments, double gamma);
PolicyGrad episode_grad_forced(const PolicyParameters& params, const BoundQuery& q,
                               const KnowledgeGraph& g, const LinkPredictor& pi,
                               PEMode pe_mode, std::span<const std::vector<int>> assignments,
                               double gamma);

}  // namespace anycq
