#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "anycq/compgraph.hpp"
#include "anycq/errors.hpp"
#include "anycq/policy.hpp"
#include "anycq/query.hpp"
#include "support/testutil.hpp"

using namespace anycq;

namespace {

struct Setup {
  KnowledgeGraph g;
  CompGraph cg;
  PerfectPredictor perfect;
  std::vector<int> alpha;
  std::vector<std::uint8_t> le;

  Setup(const char* text, int num_entities, int num_facts, std::uint64_t seed)
      : g(testutil::make_random_kg(num_entities, 2, num_facts, seed)),
        cg(bind(parse_query(text).disjuncts[0], g), g.num_entities()),
        perfect(g) {
    cg.set_pe(PEMode::Exact, &perfect, &g);
    Rng rng(seed + 1);
    for (int z = 0; z < cg.num_vars(); ++z)
      alpha.push_back(static_cast<int>(uniform_index(rng, g.num_entities())));
    cg.compute_le(perfect, alpha, le);
  }

  std::vector<float> fresh_hidden(const PolicyParameters& p) const {
    std::vector<float> h(static_cast<std::size_t>(cg.num_value_vertices()) * p.d);
    for (int v = 0; v < cg.num_value_vertices(); ++v)
      for (int k = 0; k < p.d; ++k) h[static_cast<std::size_t>(v) * p.d + k] = p.h_init[k];
    return h;
  }
};

std::vector<std::vector<float>*> tensor_list(PolicyParameters& p) {
  std::vector<std::vector<float>*> out;
  for_each_tensor(p, [&](std::vector<float>& t) { out.push_back(&t); });
  return out;
}

}  // namespace

TEST_CASE("forward emits normalized full-support distributions") {
  Setup s("Q() := EXISTS x,y . r0(x,y) & r1(y,c:e0) & !r0(y,x)", 12, 40, 7);
  const PolicyParameters p = init_policy(16, 16, 3);
  std::vector<float> h = s.fresh_hidden(p);
  StepTape tape;
  std::vector<double> mu;
  policy_forward(p, s.cg, s.alpha, s.le, h, tape, mu);

  const int ne = s.g.num_entities();
  REQUIRE(static_cast<int>(mu.size()) == s.cg.num_vars() * ne);
  const double floor = std::exp(-100.0) / ne;
  for (int z = 0; z < s.cg.num_vars(); ++z) {
    double sum = 0.0;
    for (int a = 0; a < ne; ++a) {
      CHECK(mu[z * ne + a] >= floor);
      sum += mu[z * ne + a];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("forward is deterministic") {
  Setup s("Q() := EXISTS x,y . r0(x,y) & r1(y,y)", 9, 25, 11);
  const PolicyParameters p = init_policy(16, 16, 5);
  std::vector<float> h1 = s.fresh_hidden(p), h2 = s.fresh_hidden(p);
  StepTape t1, t2;
  std::vector<double> mu1, mu2;
  policy_forward(p, s.cg, s.alpha, s.le, h1, t1, mu1);
  policy_forward(p, s.cg, s.alpha, s.le, h2, t2, mu2);
  CHECK(mu1 == mu2);
  CHECK(h1 == h2);
}

TEST_CASE("constant output head yields uniform distributions") {
  Setup s("Q() := EXISTS x,y . r0(x,y)", 10, 20, 13);
  PolicyParameters p = init_policy(16, 16, 9);
  std::fill(p.O.l2.w.begin(), p.O.l2.w.end(), 0.0f);
  std::fill(p.O.l2.b.begin(), p.O.l2.b.end(), 0.0f);
  std::vector<float> h = s.fresh_hidden(p);
  StepTape tape;
  std::vector<double> mu;
  policy_forward(p, s.cg, s.alpha, s.le, h, tape, mu);
  const int ne = s.g.num_entities();
  for (double x : mu) CHECK(x == doctest::Approx(1.0 / ne).epsilon(1e-12));
}

TEST_CASE("relabeling entities permutes the distributions") {
  const int ne = 6;
  const KnowledgeGraph g1 = testutil::make_random_kg(ne, 2, 14, 17);
  const std::vector<int> sigma = {3, 0, 5, 1, 4, 2};

  std::vector<std::string> names2(ne);
  for (int i = 0; i < ne; ++i) names2[sigma[i]] = g1.entity_name(i);
  std::vector<Triple> facts2;
  for (const Triple& t : g1.facts()) facts2.push_back({t.rel, sigma[t.head], sigma[t.tail]});
  const KnowledgeGraph g2 =
      KnowledgeGraph::from_data(names2, g1.relation_names(), facts2);

  const char* text = "Q() := EXISTS x,y . r0(x,y) & r1(y,c:e2) & !r0(y,y)";
  const ConjunctiveQuery q = parse_query(text).disjuncts[0];
  CompGraph cg1(bind(q, g1), ne);
  CompGraph cg2(bind(q, g2), ne);
  const PerfectPredictor pi1(g1), pi2(g2);
  cg1.set_pe(PEMode::Exact, &pi1, &g1);
  cg2.set_pe(PEMode::Exact, &pi2, &g2);

  const PolicyParameters p = init_policy(16, 16, 21);
  const std::vector<int> alpha1 = {4, 1};
  std::vector<int> alpha2;
  for (int a : alpha1) alpha2.push_back(sigma[a]);

  std::vector<std::uint8_t> le1, le2;
  cg1.compute_le(pi1, alpha1, le1);
  cg2.compute_le(pi2, alpha2, le2);

  std::vector<float> h1(static_cast<std::size_t>(cg1.num_value_vertices()) * p.d);
  std::vector<float> h2 = h1;
  for (int v = 0; v < cg1.num_value_vertices(); ++v)
    for (int k = 0; k < p.d; ++k) {
      h1[static_cast<std::size_t>(v) * p.d + k] = p.h_init[k];
      h2[static_cast<std::size_t>(v) * p.d + k] = p.h_init[k];
    }
  StepTape t1, t2;
  std::vector<double> mu1, mu2;
  policy_forward(p, cg1, alpha1, le1, h1, t1, mu1);
  policy_forward(p, cg2, alpha2, le2, h2, t2, mu2);

  for (int z = 0; z < cg1.num_vars(); ++z)
    for (int a = 0; a < ne; ++a)
      CHECK(mu2[z * ne + sigma[a]] == doctest::Approx(mu1[z * ne + a]).epsilon(1e-5));
  for (int z = 0; z < cg1.num_vars(); ++z)
    for (int a = 0; a < ne; ++a)
      for (int k = 0; k < p.d; ++k)
        CHECK(h2[static_cast<std::size_t>(z * ne + sigma[a]) * p.d + k] ==
              doctest::Approx(h1[static_cast<std::size_t>(z * ne + a) * p.d + k])
                  .epsilon(1e-4));
}

TEST_CASE("sampling follows the distribution") {
  Rng rng(3);
  const int ne = 4;

  SUBCASE("point mass") {
    std::vector<double> mu(ne, 0.0);
    mu[2] = 1.0;
    std::vector<int> alpha;
    for (int i = 0; i < 50; ++i) {
      const double lp = sample_assignment(mu, 1, ne, rng, alpha);
      CHECK(alpha == std::vector<int>{2});
      CHECK(lp == doctest::Approx(0.0));
    }
  }

  SUBCASE("uniform marginals within 4 sigma") {
    std::vector<double> mu(2 * ne, 1.0 / ne);
    std::vector<int> counts(ne, 0);
    std::vector<int> joint00(1, 0);
    std::vector<int> alpha;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      sample_assignment(mu, 2, ne, rng, alpha);
      counts[alpha[0]]++;
      if (alpha[0] == 0 && alpha[1] == 0) joint00[0]++;
    }
    const double sigma_m = std::sqrt(0.25 * 0.75 / n);
    for (int a = 0; a < ne; ++a)
      CHECK(std::abs(counts[a] / static_cast<double>(n) - 0.25) < 4 * sigma_m);
    const double sigma_j = std::sqrt(0.0625 * 0.9375 / n);
    CHECK(std::abs(joint00[0] / static_cast<double>(n) - 0.0625) < 4 * sigma_j);
  }

  SUBCASE("log probability matches the factored product") {
    std::vector<double> mu = {0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25};
    std::vector<int> alpha;
    const double lp = sample_assignment(mu, 2, ne, rng, alpha);
    CHECK(lp == doctest::Approx(std::log(mu[alpha[0]]) + std::log(mu[ne + alpha[1]])));
    CHECK(lp == doctest::Approx(assignment_log_prob(mu, ne, alpha)));
  }
}

TEST_CASE("checkpoints round-trip byte-identically") {
  const PolicyParameters p = init_policy(8, 12, 33);
  std::ostringstream out;
  save_policy(out, p);
  std::istringstream in(out.str());
  const PolicyParameters q = load_policy(in);
  CHECK(q.d == p.d);
  CHECK(q.hidden == p.hidden);
  std::ostringstream out2;
  save_policy(out2, q);
  CHECK(out.str() == out2.str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  const PolicyParameters p = init_policy(8, 12, 33);
  std::ostringstream out;
  save_policy(out, p);
  std::string bytes = out.str();

  std::string magic = bytes;
  magic[0] ^= 0x5a;
  std::istringstream bad_magic(magic);
  CHECK_THROWS_AS(load_policy(bad_magic), DataError);

  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_policy(truncated), DataError);
}

TEST_CASE("one-step log-probability gradient matches finite differences") {
  Setup s("Q() := EXISTS x,y . r0(x,y) & r1(y,c:e0)", 6, 14, 41);
  const int d = 8;
  PolicyParameters params = init_policy(d, d, 55);
  const std::vector<int> selected = {2, 5};

  const auto loss = [&](PolicyParameters& p) {
    std::vector<float> h = s.fresh_hidden(p);
    StepTape tape;
    std::vector<double> mu;
    policy_forward(p, s.cg, s.alpha, s.le, h, tape, mu);
    return assignment_log_prob(mu, s.g.num_entities(), selected);
  };

  PolicyGrad grad(params);
  grad.zero();
  {
    std::vector<float> h = s.fresh_hidden(params);
    StepTape tape;
    std::vector<double> mu;
    policy_forward(params, s.cg, s.alpha, s.le, h, tape, mu);
    std::vector<float> dh(h.size(), 0.0f);
    policy_backward(params, s.cg, tape, 1.0, selected, dh, grad);
    for (int v = 0; v < s.cg.num_value_vertices(); ++v)
      for (int k = 0; k < d; ++k)
        grad.g.h_init[static_cast<std::size_t>(k)] += dh[static_cast<std::size_t>(v) * d + k];
  }

  auto ptensors = tensor_list(params);
  auto gtensors = tensor_list(grad.g);
  Rng rng(77);
  for (int dir = 0; dir < 8; ++dir) {
    std::vector<std::vector<float>> u;
    double norm = 0.0;
    for (const auto* t : ptensors) {
      u.emplace_back(t->size());
      for (float& x : u.back()) {
        x = static_cast<float>(2.0 * uniform_double(rng) - 1.0);
        norm += static_cast<double>(x) * x;
      }
    }
    norm = std::sqrt(norm);

    double analytic = 0.0;
    for (std::size_t i = 0; i < gtensors.size(); ++i)
      for (std::size_t k = 0; k < u[i].size(); ++k)
        analytic += static_cast<double>((*gtensors[i])[k]) * (u[i][k] / norm);

    const double eps = 1e-2;
    PolicyParameters plus = params, minus = params;
    auto pt = tensor_list(plus);
    auto mt = tensor_list(minus);
    for (std::size_t i = 0; i < pt.size(); ++i)
      for (std::size_t k = 0; k < u[i].size(); ++k) {
        const float step = static_cast<float>(eps * (u[i][k] / norm));
        (*pt[i])[k] += step;
        (*mt[i])[k] -= step;
      }
    const double fd = (loss(plus) - loss(minus)) / (2 * eps);
    CHECK(std::abs(analytic - fd) <= 2e-3 * std::max({std::abs(analytic), std::abs(fd), 1e-2}));
  }
}
