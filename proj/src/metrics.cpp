#include "anycq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <unordered_set>

#include "anycq/errors.hpp"
#include "anycq/oracle.hpp"

namespace anycq {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

double harmonic(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

struct QacAcc {
  int instances = 0;
  int timeouts = 0;
  double f1_sum = 0.0;
  std::int64_t tp = 0, predicted = 0, positives = 0;
  std::int64_t easy_tp = 0, easy_total = 0, hard_tp = 0, hard_total = 0;

  MetricsRow row(std::string label) const {
    MetricsRow r;
    r.label = std::move(label);
    r.instances = instances;
    r.easy = static_cast<int>(easy_total);
    r.hard = static_cast<int>(hard_total);
    r.f1 = ratio(f1_sum, instances);
    r.precision = ratio(static_cast<double>(tp), static_cast<double>(predicted));
    r.recall = ratio(static_cast<double>(tp), static_cast<double>(positives));
    r.easy_recall = ratio(static_cast<double>(easy_tp), static_cast<double>(easy_total));
    r.hard_recall = ratio(static_cast<double>(hard_tp), static_cast<double>(hard_total));
    r.timeouts = timeouts;
    return r;
  }
};

struct QarAcc {
  int instances = 0;
  int answered = 0;
  int correct = 0;
  int timeouts = 0;
  int easy_total = 0, easy_correct = 0, hard_total = 0, hard_correct = 0;

  MetricsRow row(std::string label) const {
    MetricsRow r;
    r.label = std::move(label);
    r.instances = instances;
    r.easy = easy_total;
    r.hard = hard_total;
    r.precision = ratio(correct, answered);
    r.recall = ratio(correct, instances);
    r.f1 = harmonic(r.precision, r.recall);
    r.easy_recall = ratio(easy_correct, easy_total);
    r.hard_recall = ratio(hard_correct, hard_total);
    r.timeouts = timeouts;
    return r;
  }
};

std::string arity_label(int k) { return "k=" + std::to_string(k); }

}  // namespace

MetricsReport f1_qac(const std::vector<QACInstance>& data,
                     const std::vector<QacPrediction>& preds) {
  if (data.size() != preds.size())
    throw DataError("prediction count does not match the instance count");
  QacAcc total;
  std::map<int, QacAcc> by_arity;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const QACInstance& inst = data[i];
    const std::unordered_set<std::string> c(inst.correct.begin(), inst.correct.end());
    const std::unordered_set<std::string> w(inst.wrong.begin(), inst.wrong.end());
    const std::unordered_set<std::string> hard(inst.hard.begin(), inst.hard.end());
    std::unordered_set<std::string> a;
    for (const std::string& e : preds[i].accepted) {
      if (!c.count(e) && !w.count(e))
        throw DataError("accepted entity \"" + e + "\" is not a candidate of instance " +
                        std::to_string(i));
      a.insert(e);
    }
    std::int64_t a_int_c = 0, a_minus_c = 0, w_int_a = 0;
    std::int64_t easy_tp = 0, hard_tp = 0;
    for (const std::string& e : a) {
      if (c.count(e)) {
        ++a_int_c;
        if (hard.count(e)) {
          ++hard_tp;
        } else {
          ++easy_tp;
        }
      } else {
        ++a_minus_c;
      }
      if (w.count(e)) ++w_int_a;
    }
    const std::int64_t denom = 2 * a_int_c + a_minus_c + w_int_a;
    const double f1 = denom > 0 ? 2.0 * static_cast<double>(a_int_c) / static_cast<double>(denom) : 0.0;

    const int arity = static_cast<int>(inst.query.free_vars().size());
    for (QacAcc* acc : {&total, &by_arity[arity]}) {
      acc->instances += 1;
      acc->timeouts += preds[i].timed_out ? 1 : 0;
      acc->f1_sum += f1;
      acc->tp += a_int_c;
      acc->predicted += static_cast<std::int64_t>(a.size());
      acc->positives += static_cast<std::int64_t>(c.size());
      acc->easy_tp += easy_tp;
      acc->easy_total += static_cast<std::int64_t>(c.size() - hard.size());
      acc->hard_tp += hard_tp;
      acc->hard_total += static_cast<std::int64_t>(hard.size());
    }
  }
  MetricsReport rep;
  rep.total = total.row("total");
  for (const auto& [k, acc] : by_arity) rep.per_arity.push_back(acc.row(arity_label(k)));
  return rep;
}

MetricsReport f1_qar(const std::vector<QARInstance>& data,
                     const std::vector<QarPrediction>& preds,
                     const KnowledgeGraph& g_tilde, double oracle_timeout_sec) {
  if (data.size() != preds.size())
    throw DataError("prediction count does not match the instance count");
  QarAcc total;
  std::map<int, QarAcc> by_arity;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const QARInstance& inst = data[i];
    const QarPrediction& pred = preds[i];
    const std::size_t arity = inst.query.free_vars().size();
    bool correct = false;
    if (pred.answered) {
      if (pred.tuple.size() != arity)
        throw DataError("answer arity does not match the query of instance " +
                        std::to_string(i));
      correct = oracle_verifies(inst.query, pred.tuple, g_tilde, oracle_timeout_sec);
    }
    for (QarAcc* acc : {&total, &by_arity[static_cast<int>(arity)]}) {
      acc->instances += 1;
      acc->answered += pred.answered ? 1 : 0;
      acc->correct += correct ? 1 : 0;
      acc->timeouts += pred.timed_out ? 1 : 0;
      (inst.has_trivial ? acc->easy_total : acc->hard_total) += 1;
      if (correct) (inst.has_trivial ? acc->easy_correct : acc->hard_correct) += 1;
    }
  }
  MetricsReport rep;
  rep.total = total.row("total");
  for (const auto& [k, acc] : by_arity) rep.per_arity.push_back(acc.row(arity_label(k)));
  return rep;
}

namespace {

nlohmann::json row_to_json(const MetricsRow& r) {
  return {{"label", r.label},
          {"instances", r.instances},
          {"easy", r.easy},
          {"hard", r.hard},
          {"f1", r.f1},
          {"precision", r.precision},
          {"recall", r.recall},
          {"easy_recall", r.easy_recall},
          {"hard_recall", r.hard_recall},
          {"timeouts", r.timeouts}};
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["total"] = row_to_json(r.total);
  j["per_arity"] = nlohmann::json::array();
  for (const MetricsRow& row : r.per_arity) j["per_arity"].push_back(row_to_json(row));
  return j;
}

std::string metrics_to_text(const MetricsReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %6s %6s %6s %7s %7s %7s %8s %8s %5s\n", "split",
                "inst", "easy", "hard", "F1", "Prec", "Rec", "EasyRec", "HardRec", "t/o");
  out += buf;
  auto line = [&](const MetricsRow& row) {
    std::snprintf(buf, sizeof(buf), "%-8s %6d %6d %6d %7.4f %7.4f %7.4f %8.4f %8.4f %5d\n",
                  row.label.c_str(), row.instances, row.easy, row.hard, row.f1,
                  row.precision, row.recall, row.easy_recall, row.hard_recall, row.timeouts);
    out += buf;
  };
  for (const MetricsRow& row : r.per_arity) line(row);
  line(r.total);
  return out;
}

std::vector<TimingRow> timing_profile(const std::vector<TimingSample>& samples) {
  struct Acc {
    std::int64_t vertices = 0, edges = 0, steps = 0;
    int queries = 0;
    double seconds = 0.0;
  };
  std::map<std::pair<int, int>, Acc> bins;
  for (const TimingSample& s : samples) {
    Acc& a = bins[{s.num_vars, s.num_literals}];
    a.vertices += s.vertices;
    a.edges += s.edges;
    a.steps += static_cast<std::int64_t>(s.step_seconds.size());
    a.queries += 1;
    a.seconds += std::accumulate(s.step_seconds.begin(), s.step_seconds.end(), 0.0);
  }
  std::vector<TimingRow> rows;
  for (const auto& [key, a] : bins) {
    TimingRow r;
    r.num_vars = key.first;
    r.num_literals = key.second;
    r.vertices = a.queries > 0 ? a.vertices / a.queries : 0;
    r.edges = a.queries > 0 ? a.edges / a.queries : 0;
    r.queries = a.queries;
    r.steps = a.steps;
    r.ast = a.steps > 0 ? a.seconds / static_cast<double>(a.steps) : 0.0;
    r.ast_normalized = r.ast / static_cast<double>(r.num_vars + 2 * r.num_literals);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json timing_to_json(const std::vector<TimingRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const TimingRow& r : rows) {
    j.push_back({{"num_vars", r.num_vars},
                 {"num_literals", r.num_literals},
                 {"vertices", r.vertices},
                 {"edges", r.edges},
                 {"queries", r.queries},
                 {"steps", r.steps},
                 {"ast", r.ast},
                 {"ast_normalized", r.ast_normalized}});
  }
  return j;
}

std::string timing_to_text(const std::vector<TimingRow>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%5s %5s %9s %10s %7s %8s %12s %12s\n", "vars", "lits",
                "vertices", "edges", "queries", "steps", "AST[s]", "AST/size");
  out += buf;
  for (const TimingRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%5d %5d %9lld %10lld %7d %8lld %12.3e %12.3e\n",
                  r.num_vars, r.num_literals, static_cast<long long>(r.vertices),
                  static_cast<long long>(r.edges), r.queries, static_cast<long long>(r.steps),
                  r.ast, r.ast_normalized);
    out += buf;
  }
  return out;
}

double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("mismatched series lengths");
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, sstot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    sstot += (y[i] - my) * (y[i] - my);
  }
  if (sstot <= 0.0) return 1.0;
  const double b = sxx > 0.0 ? sxy / sxx : 0.0;
  double ssres = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - my - b * (x[i] - mx);
    ssres += e * e;
  }
  return 1.0 - ssres / sstot;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("mismatched series lengths");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
    sxy += (rx[i] - mx) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace anycq
