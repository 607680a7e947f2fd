#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "anycq/errors.hpp"
#include "anycq/fuzzy.hpp"
#include "anycq/trainer.hpp"
#include "support/testutil.hpp"

using namespace anycq;

namespace {

struct Shape {
  int literals;
  int exists;
  int negated;
};

const std::map<std::string, Shape> kShapes = {
    {"1p", {1, 0, 0}}, {"2p", {2, 1, 0}},  {"3p", {3, 2, 0}},  {"2i", {2, 0, 0}},
    {"3i", {3, 0, 0}}, {"pi", {3, 1, 0}},  {"ip", {3, 1, 0}},  {"2in", {2, 0, 1}},
    {"3in", {3, 0, 1}}, {"inp", {3, 1, 1}}, {"pin", {3, 1, 1}},
};

ConjunctiveQuery positive_part(const ConjunctiveQuery& q) {
  ConjunctiveQuery out = q;
  out.literals.clear();
  for (const Literal& lit : q.literals)
    if (lit.is_clause() || !lit.negated) out.literals.push_back(lit);
  return out;
}

double mean_episode_best(const PolicyParameters& params, const KnowledgeGraph& g,
                         const std::vector<ConjunctiveQuery>& queries) {
  const PerfectPredictor pi(g);
  TrainConfig cfg;
  cfg.t_train = 10;
  double sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    Rng rng = derive_rng(4242, i);
    sum += run_episode(params, queries[i], g, pi, cfg, rng).best_score;
  }
  return sum / static_cast<double>(queries.size());
}

}  // namespace

TEST_CASE("training templates have the advertised shapes and a planted answer") {
  const KnowledgeGraph g = testutil::make_random_kg(20, 3, 120, 51);
  for (const auto& [tag, shape] : kShapes) {
    for (std::uint64_t i = 0; i < 5; ++i) {
      Rng rng = derive_rng(60 + i, std::hash<std::string>{}(tag));
      const ConjunctiveQuery q = sample_training_query(g, tag, rng);
      CAPTURE(tag);
      CHECK(q.free_vars == std::vector<std::string>{"x1"});
      CHECK(static_cast<int>(q.literals.size()) == shape.literals);
      CHECK(static_cast<int>(q.exist_vars.size()) == shape.exists);
      int negs = 0;
      for (const Literal& lit : q.literals)
        if (!lit.is_clause() && lit.negated) ++negs;
      CHECK(negs == shape.negated);

      const DNFQuery round = parse_query(print_query(DNFQuery{{q}}));
      CHECK(print_query(round) == print_query(DNFQuery{{q}}));

      CHECK(!testutil::brute_answers(q, g).empty());
    }
  }
}

TEST_CASE("negated templates exclude a witness of the positive part") {
  const KnowledgeGraph g = testutil::make_random_kg(20, 3, 120, 52);
  for (const std::string tag : {"2in", "3in", "pin", "inp"}) {
    for (std::uint64_t i = 0; i < 5; ++i) {
      Rng rng = derive_rng(70 + i, std::hash<std::string>{}(tag));
      const ConjunctiveQuery q = sample_training_query(g, tag, rng);
      const auto full = testutil::brute_answers(q, g);
      const auto pos = testutil::brute_answers(positive_part(q), g);
      CAPTURE(tag);
      CHECK(!full.empty());
      CHECK(std::includes(pos.begin(), pos.end(), full.begin(), full.end()));
      if (tag == "2in" || tag == "3in" || tag == "pin") CHECK(pos.size() > full.size());
    }
  }
}

TEST_CASE("unknown templates and sparse graphs raise DataError") {
  const KnowledgeGraph g = testutil::make_random_kg(20, 3, 120, 53);
  Rng rng(0);
  CHECK_THROWS_AS(sample_training_query(g, "4p", rng), DataError);

  std::istringstream in("a\tr\tb\n");
  const KnowledgeGraph tiny = KnowledgeGraph::load_triples(in);
  Rng rng2(0);
  CHECK_THROWS_AS(sample_training_query(tiny, "3i", rng2), DataError);
}

TEST_CASE("template sampling is deterministic in the rng") {
  const KnowledgeGraph g = testutil::make_random_kg(20, 3, 120, 54);
  Rng a(9), b(9);
  const ConjunctiveQuery qa = sample_training_query(g, "pin", a);
  const ConjunctiveQuery qb = sample_training_query(g, "pin", b);
  CHECK(print_query(DNFQuery{{qa}}) == print_query(DNFQuery{{qb}}));
}

TEST_CASE("episodes record a consistent trajectory") {
  const KnowledgeGraph g = testutil::make_random_kg(15, 3, 80, 55);
  const PerfectPredictor pi(g);
  const PolicyParameters params = init_policy(16, 16, 2);
  TrainConfig cfg;
  cfg.t_train = 10;
  Rng qrng(3);
  const ConjunctiveQuery q = sample_training_query(g, "2p", qrng);
  Rng rng(4);
  const Episode ep = run_episode(params, q, g, pi, cfg, rng);

  CHECK(ep.assignments.size() == 11);
  CHECK(ep.scores.size() == 11);
  CHECK(ep.log_probs.size() == 10);
  CHECK(ep.rewards.size() == 10);
  CHECK(ep.tapes.size() == 10);

  double best = ep.scores[0];
  double reward_sum = 0.0;
  for (std::size_t t = 1; t < ep.scores.size(); ++t) {
    const double r = ep.rewards[t - 1];
    CHECK(r >= 0.0);
    CHECK(r == doctest::Approx(std::max(0.0, ep.scores[t] - best)).epsilon(1e-12));
    best = std::max(best, ep.scores[t]);
    reward_sum += r;
  }
  CHECK(ep.best_score == doctest::Approx(best));
  CHECK(reward_sum == doctest::Approx(ep.best_score - ep.scores[0]));
  for (std::size_t t = 0; t < ep.assignments.size(); ++t)
    CHECK(ep.scores[t] ==
          doctest::Approx(assignment_score(pi, ep.cg.query(), ep.assignments[t])));
  for (double lp : ep.log_probs) CHECK(lp <= 0.0);

  TrainConfig bad;
  bad.t_train = 0;
  Rng rng2(1);
  CHECK_THROWS_AS(run_episode(params, q, g, pi, bad, rng2), DataError);
}

TEST_CASE("reward-free episodes leave the parameters untouched") {
  std::istringstream in("a\tr1\tm\nm\tr2\tb\n");
  const KnowledgeGraph g = KnowledgeGraph::load_triples(in);
  const PerfectPredictor pi(g);
  PolicyParameters params = init_policy(16, 16, 6);
  TrainConfig cfg;
  cfg.t_train = 4;
  cfg.lr = 1e-2;

  const ConjunctiveQuery ground = parse_query("Q() := r1(c:a,c:m)").disjuncts[0];
  Rng rng(1);
  std::vector<Episode> eps;
  eps.push_back(run_episode(params, ground, g, pi, cfg, rng));
  eps.push_back(run_episode(params, ground, g, pi, cfg, rng));
  for (const Episode& ep : eps)
    for (double r : ep.rewards) CHECK(r == 0.0);

  std::ostringstream before;
  save_policy(before, params);
  AdamState adam = make_adam_state(params);
  const double loss = reinforce_update(params, eps, cfg, adam);
  CHECK(loss == 0.0);
  std::ostringstream after;
  save_policy(after, params);
  CHECK(before.str() == after.str());
}

TEST_CASE("a single rewarded step reduces to the log-probability") {
  std::istringstream in("a\tr1\tm\nm\tr2\tb\n");
  const KnowledgeGraph g = KnowledgeGraph::load_triples(in);
  const PerfectPredictor pi(g);
  const PolicyParameters params = init_policy(16, 16, 7);
  const BoundQuery bq = bind(parse_query("Q() := EXISTS x . r1(c:a,x)").disjuncts[0], g);

  const std::vector<int> a0 = {*g.entity_id("b")};
  const std::vector<int> a1 = {*g.entity_id("m")};
  const std::vector<std::vector<int>> traj = {a0, a1};
  const double loss = episode_loss_forced(params, bq, g, pi, PEMode::Exact, traj, 1.0);

  CompGraph cg(bq, g.num_entities());
  cg.set_pe(PEMode::Exact, &pi, &g);
  std::vector<float> h(static_cast<std::size_t>(cg.num_value_vertices()) * params.d);
  for (int v = 0; v < cg.num_value_vertices(); ++v)
    for (int k = 0; k < params.d; ++k)
      h[static_cast<std::size_t>(v) * params.d + k] = params.h_init[k];
  std::vector<std::uint8_t> le;
  cg.compute_le(pi, a0, le);
  StepTape tape;
  std::vector<double> mu;
  policy_forward(params, cg, a0, le, h, tape, mu);
  const double lp = assignment_log_prob(mu, g.num_entities(), a1);
  CHECK(loss == doctest::Approx(-lp).epsilon(1e-12));
}

TEST_CASE("forced-trajectory gradients match finite differences") {
  KnowledgeGraph g = testutil::make_random_kg(6, 2, 14, 41);
  const ConjunctiveQuery q =
      parse_query("Q() := EXISTS x,y . r0(x,y) & r1(y,c:e0)").disjuncts[0];
  std::vector<int> witness;
  for (int x = 0; x < 6 && witness.empty(); ++x)
    for (int y = 0; y < 6 && witness.empty(); ++y)
      if (g.contains_fact(0, x, y) && g.contains_fact(1, y, 0)) witness = {x, y};
  REQUIRE(!witness.empty());

  const PerfectPredictor pi(g);
  const BoundQuery bq = bind(q, g);
  const std::vector<std::vector<int>> traj = {{(witness[0] + 1) % 6, (witness[1] + 2) % 6},
                                              {witness[0], (witness[1] + 3) % 6},
                                              witness};
  const double gamma = 0.75;
  PolicyParameters params = init_policy(8, 8, 13);
  const double base = episode_loss_forced(params, bq, g, pi, PEMode::Exact, traj, gamma);
  CHECK(std::isfinite(base));
  CHECK(base != 0.0);

  PolicyGrad grad = episode_grad_forced(params, bq, g, pi, PEMode::Exact, traj, gamma);
  std::vector<std::vector<float>*> gt;
  for_each_tensor(grad.g, [&](std::vector<float>& t) { gt.push_back(&t); });

  Rng rng(99);
  for (int dir = 0; dir < 6; ++dir) {
    std::vector<std::vector<float>> u;
    double norm = 0.0;
    for (const auto* t : gt) {
      u.emplace_back(t->size());
      for (float& x : u.back()) {
        x = static_cast<float>(2.0 * uniform_double(rng) - 1.0);
        norm += static_cast<double>(x) * x;
      }
    }
    norm = std::sqrt(norm);
    double analytic = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i)
      for (std::size_t k = 0; k < u[i].size(); ++k)
        analytic += static_cast<double>((*gt[i])[k]) * (u[i][k] / norm);

    const double eps = 1e-2;
    PolicyParameters plus = params, minus = params;
    std::vector<std::vector<float>*> pt, mt;
    for_each_tensor(plus, [&](std::vector<float>& t) { pt.push_back(&t); });
    for_each_tensor(minus, [&](std::vector<float>& t) { mt.push_back(&t); });
    for (std::size_t i = 0; i < pt.size(); ++i)
      for (std::size_t k = 0; k < u[i].size(); ++k) {
        const float step = static_cast<float>(eps * (u[i][k] / norm));
        (*pt[i])[k] += step;
        (*mt[i])[k] -= step;
      }
    const double fp = episode_loss_forced(plus, bq, g, pi, PEMode::Exact, traj, gamma);
    const double fm = episode_loss_forced(minus, bq, g, pi, PEMode::Exact, traj, gamma);
    const double fd = (fp - fm) / (2 * eps);
    CHECK(std::abs(analytic - fd) <= 2e-3 * std::max({std::abs(analytic), std::abs(fd), 1e-2}));
  }
}

TEST_CASE("training logs parseable metrics and checkpoints resume exactly") {
  const KnowledgeGraph g = testutil::make_random_kg(25, 3, 130, 7);
  TrainConfig cfg;
  cfg.t_train = 5;
  cfg.batch_size = 2;
  cfg.num_batches = 4;
  cfg.lr = 1e-3;
  cfg.seed = 11;
  cfg.mix = {"1p", "2p", "2i"};
  cfg.checkpoint_every = 2;
  cfg.checkpoint_path = "/tmp/anycq_trainer_ckpt.bin";

  const PolicyParameters init = init_policy(16, 16, 3);
  std::ostringstream full_log;
  train(g, cfg, init, &full_log);

  std::vector<double> losses;
  std::istringstream lines(full_log.str());
  std::string line;
  int expect_batch = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j["batch"].get<int>() == expect_batch++);
    CHECK(std::isfinite(j["loss"].get<double>()));
    CHECK(j["mean_best_score"].get<double>() >= 0.0);
    CHECK(j["wall_time"].get<double>() >= 0.0);
    losses.push_back(j["loss"].get<double>());
  }
  REQUIRE(losses.size() == 4);

  TrainConfig head = cfg;
  head.num_batches = 2;
  train(g, head, init, nullptr);
  const PolicyParameters mid = load_policy_file(cfg.checkpoint_path);

  TrainConfig tail = cfg;
  tail.start_batch = 2;
  tail.num_batches = 3;
  tail.checkpoint_every = 0;
  std::ostringstream tail_log;
  train(g, tail, mid, &tail_log);
  std::istringstream tail_lines(tail_log.str());
  REQUIRE(std::getline(tail_lines, line));
  const nlohmann::json j = nlohmann::json::parse(line);
  CHECK(j["batch"].get<int>() == 2);
  CHECK(j["loss"].get<double>() == losses[2]);
}

TEST_CASE("a short training run improves held-out episode scores") {
  const KnowledgeGraph g = testutil::make_random_kg(12, 3, 80, 77);
  std::vector<ConjunctiveQuery> held_out;
  for (std::uint64_t i = 0; i < 25; ++i) {
    Rng rng = derive_rng(999, i);
    held_out.push_back(sample_training_query(g, "2p", rng));
  }

  const PolicyParameters init = init_policy(16, 16, 5);
  const double before = mean_episode_best(init, g, held_out);

  TrainConfig cfg;
  cfg.t_train = 15;
  cfg.batch_size = 4;
  cfg.num_batches = 80;
  cfg.lr = 2e-3;
  cfg.seed = 21;
  cfg.mix = {"2p"};
  const PolicyParameters trained = train(g, cfg, init, nullptr);
  const double after = mean_episode_best(trained, g, held_out);

  CHECK(after > before);
  CHECK(after > 0.5);
}
