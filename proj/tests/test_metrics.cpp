#include <doctest.h>

#include <cmath>
#include <sstream>

#include "anycq/errors.hpp"
#include "anycq/metrics.hpp"

using namespace anycq;

namespace {

const double kTol = 1e-12;

QACInstance qac(const char* text, std::vector<std::string> correct,
                std::vector<std::string> wrong, std::vector<std::string> hard = {}) {
  QACInstance inst;
  inst.query = parse_query(text);
  inst.correct = std::move(correct);
  inst.wrong = std::move(wrong);
  inst.hard = std::move(hard);
  return inst;
}

QARInstance qar(const char* text, bool has_trivial) {
  QARInstance inst;
  inst.query = parse_query(text);
  inst.has_trivial = has_trivial;
  return inst;
}

KnowledgeGraph tilde() {
  std::istringstream in(
      "a\tr1\tm\n"
      "c\tr1\tm\n"
      "m\tr2\tb\n"
      "b\tr2\tb\n"
      "a\tr2\tc\n");
  return KnowledgeGraph::load_triples(in);
}

}  // namespace

TEST_CASE("classification F1 fixtures") {
  const std::vector<QACInstance> data = {
      qac("Q(x1) := r(x1,c:a)", {"a", "b"}, {"c"}),
      qac("Q(x1) := r(x1,c:a)", {"a", "b", "c", "d"}, {"w1", "w2"}),
      qac("Q(x1) := r(x1,c:a)", {"a"}, {"w"}),
  };
  const std::vector<QacPrediction> preds = {
      {{"a", "b"}, false},
      {{"a", "b", "c", "d", "w1"}, false},
      {{}, false},
  };
  const MetricsReport rep = f1_qac(data, preds);
  // Per instance: 4/4 = 1, 8/(8+1+1) = 0.8, and an empty acceptance scores 0.
  CHECK(std::abs(rep.total.f1 - (1.0 + 0.8 + 0.0) / 3.0) < kTol);
  CHECK(rep.total.instances == 3);
  CHECK(std::abs(rep.total.precision - 6.0 / 7.0) < kTol);
  CHECK(std::abs(rep.total.recall - 6.0 / 7.0) < kTol);
  REQUIRE(rep.per_arity.size() == 1);
  CHECK(rep.per_arity[0].label == "k=1");
  CHECK(rep.per_arity[0].instances == 3);
}

TEST_CASE("duplicate acceptances count once") {
  const std::vector<QACInstance> data = {qac("Q(x1) := r(x1,c:a)", {"a"}, {"w"})};
  const std::vector<QacPrediction> preds = {{{"a", "a"}, false}};
  const MetricsReport rep = f1_qac(data, preds);
  CHECK(std::abs(rep.total.f1 - 1.0) < kTol);
  CHECK(std::abs(rep.total.precision - 1.0) < kTol);
}

TEST_CASE("hard and easy acceptances are split") {
  const std::vector<QACInstance> data = {
      qac("Q(x1) := r(x1,c:a)", {"a", "b", "c"}, {"w"}, {"a"})};
  const std::vector<QacPrediction> preds = {{{"a", "b"}, true}};
  const MetricsReport rep = f1_qac(data, preds);
  CHECK(rep.total.easy == 2);
  CHECK(rep.total.hard == 1);
  CHECK(std::abs(rep.total.hard_recall - 1.0) < kTol);
  CHECK(std::abs(rep.total.easy_recall - 0.5) < kTol);
  CHECK(rep.total.timeouts == 1);
}

TEST_CASE("accepting a non-candidate is an error") {
  const std::vector<QACInstance> data = {qac("Q(x1) := r(x1,c:a)", {"a"}, {"w"})};
  const std::vector<QacPrediction> preds = {{{"z"}, false}};
  CHECK_THROWS_AS(f1_qac(data, preds), DataError);
  CHECK_THROWS_AS(f1_qac(data, {}), DataError);
}

TEST_CASE("retrieval F1 fixtures") {
  const KnowledgeGraph g = tilde();
  const char* text = "Q(x1) := r1(x1,c:m)";

  SUBCASE("balanced halves give one half everywhere") {
    const std::vector<QARInstance> data = {qar(text, true), qar(text, false)};
    const std::vector<QarPrediction> preds = {
        {true, {"a"}, false},
        {true, {"b"}, false},
    };
    const MetricsReport rep = f1_qar(data, preds, g);
    CHECK(std::abs(rep.total.precision - 0.5) < kTol);
    CHECK(std::abs(rep.total.recall - 0.5) < kTol);
    CHECK(std::abs(rep.total.f1 - 0.5) < kTol);
    CHECK(std::abs(rep.total.easy_recall - 1.0) < kTol);
    CHECK(std::abs(rep.total.hard_recall - 0.0) < kTol);
    CHECK(rep.total.easy == 1);
    CHECK(rep.total.hard == 1);
  }

  SUBCASE("abstention trades recall for precision") {
    const std::vector<QARInstance> data = {qar(text, true), qar(text, true),
                                           qar(text, true), qar(text, true)};
    const std::vector<QarPrediction> preds = {
        {true, {"a"}, false},
        {true, {"c"}, false},
        {true, {"b"}, false},
        {false, {}, true},
    };
    const MetricsReport rep = f1_qar(data, preds, g);
    CHECK(std::abs(rep.total.precision - 2.0 / 3.0) < kTol);
    CHECK(std::abs(rep.total.recall - 0.5) < kTol);
    CHECK(std::abs(rep.total.f1 - 4.0 / 7.0) < kTol);
    CHECK(rep.total.timeouts == 1);
  }

  SUBCASE("no answers means zero scores, not NaN") {
    const std::vector<QARInstance> data = {qar(text, false)};
    const std::vector<QarPrediction> preds = {{false, {}, false}};
    const MetricsReport rep = f1_qar(data, preds, g);
    CHECK(rep.total.precision == 0.0);
    CHECK(rep.total.recall == 0.0);
    CHECK(rep.total.f1 == 0.0);
  }

  SUBCASE("correctness is oracle-verified, not list membership") {
    std::vector<QARInstance> data = {qar(text, true)};
    data[0].answers = {{"a"}};
    const std::vector<QarPrediction> preds = {{true, {"c"}, false}};
    const MetricsReport rep = f1_qar(data, preds, g);
    CHECK(std::abs(rep.total.recall - 1.0) < kTol);
  }

  SUBCASE("arity mismatch is an error") {
    const std::vector<QARInstance> data = {qar(text, true)};
    const std::vector<QarPrediction> preds = {{true, {"a", "b"}, false}};
    CHECK_THROWS_AS(f1_qar(data, preds, g), DataError);
  }

  SUBCASE("per-arity rows are ascending") {
    const std::vector<QARInstance> data = {
        qar("Q(x1,x2) := r1(x1,x2)", false),
        qar(text, true),
    };
    const std::vector<QarPrediction> preds = {
        {true, {"a", "m"}, false},
        {true, {"a"}, false},
    };
    const MetricsReport rep = f1_qar(data, preds, g);
    REQUIRE(rep.per_arity.size() == 2);
    CHECK(rep.per_arity[0].label == "k=1");
    CHECK(rep.per_arity[1].label == "k=2");
    CHECK(std::abs(rep.total.recall - 1.0) < kTol);
  }
}

TEST_CASE("report serialization") {
  const std::vector<QACInstance> data = {qac("Q(x1) := r(x1,c:a)", {"a"}, {"w"})};
  const std::vector<QacPrediction> preds = {{{"a"}, false}};
  const MetricsReport rep = f1_qac(data, preds);
  const nlohmann::json j = metrics_to_json(rep);
  CHECK(j["total"]["f1"].get<double>() == doctest::Approx(1.0));
  CHECK(j["total"]["instances"].get<int>() == 1);
  CHECK(j["per_arity"].size() == 1);
  const std::string text = metrics_to_text(rep);
  CHECK(text.find("total") != std::string::npos);
  CHECK(text.find("k=1") != std::string::npos);
}

TEST_CASE("timing bins by query shape") {
  std::vector<TimingSample> samples;
  samples.push_back({2, 3, 100, 400, {0.1, 0.2}});
  samples.push_back({2, 3, 200, 600, {0.3}});
  samples.push_back({1, 1, 10, 20, {}});
  const std::vector<TimingRow> rows = timing_profile(samples);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].num_vars == 1);
  CHECK(rows[0].steps == 0);
  CHECK(rows[0].ast == 0.0);
  CHECK(rows[1].num_vars == 2);
  CHECK(rows[1].num_literals == 3);
  CHECK(rows[1].vertices == 150);
  CHECK(rows[1].edges == 500);
  CHECK(rows[1].queries == 2);
  CHECK(rows[1].steps == 3);
  CHECK(std::abs(rows[1].ast - 0.2) < kTol);
  CHECK(std::abs(rows[1].ast_normalized - 0.2 / 8.0) < kTol);
  CHECK(timing_to_json(rows).size() == 2);
  CHECK(timing_to_text(rows).find("AST") != std::string::npos);
}

TEST_CASE("coefficient of determination") {
  CHECK(std::abs(linear_r2({1, 2, 3, 4}, {3, 5, 7, 9}) - 1.0) < kTol);
  CHECK(std::abs(linear_r2({0, 1, 2, 3}, {0, 1, 2, 4}) - 338.0 / 350.0) < kTol);
  CHECK(linear_r2({1, 2, 3}, {5, 5, 5}) == 1.0);
  CHECK(linear_r2({}, {}) == 0.0);
  CHECK_THROWS_AS(linear_r2({1, 2}, {1}), DataError);
}

TEST_CASE("rank correlation") {
  CHECK(std::abs(spearman_rho({1, 2, 3, 4}, {1, 4, 9, 100}) - 1.0) < kTol);
  CHECK(std::abs(spearman_rho({1, 2, 3, 4}, {100, 9, 4, 1}) + 1.0) < kTol);
  CHECK(std::abs(spearman_rho({1, 1, 2}, {3, 5, 4})) < kTol);
  CHECK(spearman_rho({7, 7, 7}, {1, 2, 3}) == 0.0);
  CHECK(spearman_rho({1}, {2}) == 0.0);
  CHECK_THROWS_AS(spearman_rho({1, 2}, {1}), DataError);
}
