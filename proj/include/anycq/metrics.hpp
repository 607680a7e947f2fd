#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "anycq/instances.hpp"
#include "anycq/kg.hpp"

namespace anycq {

// Engine verdicts for one QAC instance: the accepted candidates, a subset of
// correct + wrong.
struct QacPrediction {
  std::vector<std::string> accepted;
  bool timed_out = false;
};

// Engine output for one QAR instance: a tuple or None.
struct QarPrediction {
  bool answered = false;
  std::vector<std::string> tuple;
  bool timed_out = false;
};

struct MetricsRow {
  std::string label;
  int instances = 0;
  int easy = 0;  // QAR: has_trivial instances; QAC: easy candidate answers
  int hard = 0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double easy_recall = 0.0;
  double hard_recall = 0.0;
  int timeouts = 0;
};

struct MetricsReport {
  MetricsRow total;
  std::vector<MetricsRow> per_arity;  // ascending free arity
};

nlohmann::json metrics_to_json(const MetricsReport& r);
std::string metrics_to_text(const MetricsReport& r);

// Macro-average over instances of 2|A n C| / (2|A n C| + |A \ C| + |W n A|),
// 0/0 counting as 0. Precision/recall and the easy/hard recalls are
// candidate-level micro aggregates reported for context.
MetricsReport f1_qac(const std::vector<QACInstance>& data,
                     const std::vector<QacPrediction>& preds);

// Precision = correct/answered, recall = correct/instances, F1 their harmonic
// mean (0 when either is undefined). A returned tuple counts as correct only
// if the grounded query holds classically over the complete graph.
MetricsReport f1_qar(const std::vector<QARInstance>& data,
                     const std::vector<QarPrediction>& preds,
                     const KnowledgeGraph& g_tilde, double oracle_timeout_sec = 0.0);

// Step-time aggregation for the profiler.
struct TimingSample {
  int num_vars = 0;
  int num_literals = 0;
  std::int64_t vertices = 0;
  std::int64_t edges = 0;
  std::vector<double> step_seconds;
};

struct TimingRow {
  int num_vars = 0;
  int num_literals = 0;
  std::int64_t vertices = 0;  // averages over the bin, rounded
  std::int64_t edges = 0;
  int queries = 0;
  std::int64_t steps = 0;
  double ast = 0.0;             // average step time, seconds
  double ast_normalized = 0.0;  // ast / (num_vars + 2 * num_literals)
};

// Bins samples by (num_vars, num_literals) and averages step times.
std::vector<TimingRow> timing_profile(const std::vector<TimingSample>& samples);
nlohmann::json timing_to_json(const std::vector<TimingRow>& rows);
std::string timing_to_text(const std::vector<TimingRow>& rows);

// Coefficient of determination of the least-squares line y = a + b x.
double linear_r2(const std::vector<double>& x, const std::vector<double>& y);
// Spearman rank correlation with average ranks on ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace anycq
