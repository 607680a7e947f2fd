#include <doctest.h>

#include <sstream>

#include "anycq/bound_query.hpp"
#include "anycq/errors.hpp"
#include "anycq/fuzzy.hpp"
#include "anycq/kg.hpp"
#include "anycq/predictor.hpp"
#include "anycq/query.hpp"
#include "support/testutil.hpp"

using namespace anycq;

namespace {

KnowledgeGraph two_entity_graph() {
  std::istringstream in("a\tr\tb\na\ts\tb\n");
  return KnowledgeGraph::load_triples(in);
}

BoundQuery bind_text(const char* text, const KnowledgeGraph& g) {
  return bind(parse_query(text).disjuncts[0], g);
}

}  // namespace

TEST_CASE("literal scores: indicator, complement, clause max") {
  const KnowledgeGraph g = two_entity_graph();
  const PerfectPredictor perfect(g);
  const BoundQuery pos = bind_text("Q() := r(c:a,c:b)", g);
  CHECK(literal_score(perfect, pos.literals[0], {}, pos.constants) == 1.0);
  const BoundQuery flipped = bind_text("Q() := r(c:b,c:a)", g);
  CHECK(literal_score(perfect, flipped.literals[0], {}, flipped.constants) == 0.0);

  TabularPredictor tab;
  tab.set(*g.relation_id("r"), *g.entity_id("a"), *g.entity_id("b"), 0.3);
  tab.set(*g.relation_id("s"), *g.entity_id("a"), *g.entity_id("b"), 0.6);
  const BoundQuery neg = bind_text("Q() := !r(c:a,c:b)", g);
  CHECK(literal_score(tab, neg.literals[0], {}, neg.constants) == doctest::Approx(0.7));

  tab.set(*g.relation_id("r"), *g.entity_id("a"), *g.entity_id("b"), 0.2);
  const BoundQuery clause = bind_text("Q() := OR{ r(c:a,c:b) ; s(c:a,c:b) }", g);
  CHECK(literal_score(tab, clause.literals[0], {}, clause.constants) == doctest::Approx(0.6));
}

TEST_CASE("assignment score is the minimum over literals") {
  const KnowledgeGraph g = two_entity_graph();
  TabularPredictor tab;
  tab.set(*g.relation_id("r"), *g.entity_id("a"), *g.entity_id("b"), 0.9);
  tab.set(*g.relation_id("s"), *g.entity_id("a"), *g.entity_id("b"), 0.8);
  const BoundQuery q = bind_text("Q() := r(c:a,c:b) & s(c:a,c:b)", g);
  CHECK(assignment_score(tab, q, {}) == doctest::Approx(0.8));

  tab.set(*g.relation_id("s"), *g.entity_id("a"), *g.entity_id("b"), 0.0);
  CHECK(assignment_score(tab, q, {}) == 0.0);
}

TEST_CASE("grounded path query reaches 1.0 through the witness") {
  std::istringstream in("a\tr1\tb\nb\tr2\tc1\n");
  const KnowledgeGraph g = KnowledgeGraph::load_triples(in);
  const PerfectPredictor perfect(g);
  const BoundQuery q = bind_text("Q() := EXISTS y1 . r1(c:a,y1) & r2(y1,c:c1)", g);

  double best = 0.0;
  for (int e = 0; e < g.num_entities(); ++e) {
    const int alpha[] = {e};
    best = std::max(best, assignment_score(perfect, q, alpha));
  }
  CHECK(best == 1.0);
  CHECK(boolean_score_exhaustive(perfect, q, g.num_entities()).score == 1.0);
}

TEST_CASE("exhaustive scoring maximizes over the domain") {
  const KnowledgeGraph g = KnowledgeGraph::from_data({"a", "b", "c", "d"}, {"r"}, {});
  TabularPredictor tab;
  const double scores[] = {0.1, 0.9, 0.3, 0.2};
  for (int e = 0; e < 4; ++e) tab.set(0, 0, e, scores[e]);

  const BoundQuery q = bind_text("Q() := EXISTS y . r(c:a,y)", g);
  const ExhaustiveResult res = boolean_score_exhaustive(tab, q, 4);
  CHECK(res.score == doctest::Approx(0.9));
  CHECK(res.best_assignment == std::vector<int>{1});
  CHECK(res.visited == 4);

  const BoundQuery ground = bind_text("Q() := r(c:a,c:b)", g);
  const ExhaustiveResult res0 = boolean_score_exhaustive(tab, ground, 4);
  CHECK(res0.score == doctest::Approx(0.9));
  CHECK(res0.visited == 1);
}

TEST_CASE("exhaustive scoring refuses oversized domains") {
  const KnowledgeGraph g = testutil::make_random_kg(50, 1, 10, 1);
  const PerfectPredictor perfect(g);
  const BoundQuery q = bind_text("Q() := EXISTS x,y,z . r0(x,y) & r0(y,z)", g);
  CHECK_THROWS_AS(boolean_score_exhaustive(perfect, q, g.num_entities(), 1000), DataError);
}

TEST_CASE("DNF score is the max over disjunct scores") {
  std::istringstream in("a\tr\tb\n");
  const KnowledgeGraph g = KnowledgeGraph::load_triples(in);
  const PerfectPredictor perfect(g);
  const DNFQuery q = parse_query("Q() := r(c:b,c:a) | r(c:a,c:b)");
  double best = 0.0;
  for (const ConjunctiveQuery& d : q.disjuncts)
    best = std::max(best, boolean_score_exhaustive(perfect, bind(d, g), g.num_entities()).score);
  CHECK(best == 1.0);
}

TEST_CASE("perfect predictor scores are classical satisfaction") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const KnowledgeGraph g = testutil::make_random_kg(5, 2, 8, seed);
    const PerfectPredictor perfect(g);
    for (const char* text : {
             "Q() := EXISTS x,y . r0(x,y) & r1(y,x)",
             "Q() := EXISTS x,y . r0(x,y) & !r1(x,y)",
             "Q() := EXISTS x,y . OR{ r0(x,y) ; r1(x,y) } & r0(y,y)",
         }) {
      const ConjunctiveQuery cq = parse_query(text).disjuncts[0];
      const ExhaustiveResult res =
          boolean_score_exhaustive(perfect, bind(cq, g), g.num_entities());
      CHECK((res.score == 0.0 || res.score == 1.0));
      CHECK(res.score == (testutil::brute_sat(cq, g) ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("thresholded scoring equals propositional logic over binarized literals") {
  const KnowledgeGraph g = testutil::make_random_kg(4, 2, 6, 3);
  Rng rng(17);
  TabularPredictor tab;
  for (int r = 0; r < g.num_relations(); ++r)
    for (int a = 0; a < g.num_entities(); ++a)
      for (int b = 0; b < g.num_entities(); ++b) tab.set(r, a, b, uniform_double(rng));

  // Binarized scores as a second predictor: propositional evaluation of the
  // same formula.
  TabularPredictor bin;
  for (int r = 0; r < g.num_relations(); ++r)
    for (int a = 0; a < g.num_entities(); ++a)
      for (int b = 0; b < g.num_entities(); ++b)
        bin.set(r, a, b, tab.score(r, a, b) >= 0.5 ? 1.0 : 0.0);

  const BoundQuery q =
      bind_text("Q() := EXISTS x,y . OR{ r0(x,y) ; !r1(y,x) } & r1(x,y) & !r0(y,y)", g);
  std::vector<int> alpha(2);
  for (alpha[0] = 0; alpha[0] < 4; ++alpha[0])
    for (alpha[1] = 0; alpha[1] < 4; ++alpha[1]) {
      const bool soft = assignment_score(tab, q, alpha) >= 0.5;
      const bool prop = assignment_score(bin, q, alpha) >= 0.5;
      CHECK(soft == prop);
    }
}

TEST_CASE("lowering one literal score never raises the conjunction") {
  const KnowledgeGraph g = two_entity_graph();
  const BoundQuery q = bind_text("Q() := r(c:a,c:b) & s(c:a,c:b)", g);
  TabularPredictor hi, lo;
  hi.set(0, 0, 1, 0.7);
  hi.set(1, 0, 1, 0.6);
  lo.set(0, 0, 1, 0.7);
  lo.set(1, 0, 1, 0.4);
  CHECK(assignment_score(lo, q, {}) <= assignment_score(hi, q, {}));
}
