// anycq: command line front end wiring data loading, training, benchmark
// generation, evaluation, and single-query solving.
#include <CLI11.hpp>
#include <json.hpp>

#include <anycq/benchgen.hpp>
#include <anycq/bound_query.hpp>
#include <anycq/compgraph.hpp>
#include <anycq/errors.hpp>
#include <anycq/instances.hpp>
#include <anycq/kg.hpp>
#include <anycq/metrics.hpp>
#include <anycq/oracle.hpp>
#include <anycq/policy.hpp>
#include <anycq/predictor.hpp>
#include <anycq/query.hpp>
#include <anycq/rng.hpp>
#include <anycq/search.hpp>
#include <anycq/trainer.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

namespace {

using namespace anycq;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kRuntime = 3;

// Flag-level misuse that CLI11 cannot express (cross-flag constraints,
// malformed option payloads); reported with the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

PEMode parse_pe_mode(const std::string& s) {
  if (s == "exact") return PEMode::Exact;
  if (s == "cwa") return PEMode::CWA;
  if (s == "allone" || s == "all-one") return PEMode::AllOne;
  throw UsageError("unknown --pe-mode '" + s + "' (expected exact, cwa, or allone)");
}

std::string fmt_score(double s) {
  char buf[48];
  if (std::isfinite(s) && s == std::floor(s))
    std::snprintf(buf, sizeof buf, "%.1f", s);
  else
    std::snprintf(buf, sizeof buf, "%.6g", s);
  return buf;
}

// Observable + complete graph pair over one shared vocabulary. With no
// complete file the observable graph doubles as its own completion.
struct GraphPair {
  KnowledgeGraph obs;
  KnowledgeGraph complete;
  bool has_complete = false;
};

GraphPair load_graphs(const std::string& graph_path, const std::string& complete_path) {
  GraphPair gp;
  if (complete_path.empty()) {
    gp.obs = KnowledgeGraph::load_triples_file(graph_path);
    gp.complete = gp.obs;
    return gp;
  }
  gp.complete = KnowledgeGraph::load_triples_file(complete_path);
  const KnowledgeGraph raw = KnowledgeGraph::load_triples_file(graph_path);
  std::vector<Triple> facts;
  facts.reserve(raw.facts().size());
  for (const Triple& t : raw.facts()) {
    const auto r = gp.complete.relation_id(raw.relation_name(t.rel));
    const auto h = gp.complete.entity_id(raw.entity_name(t.head));
    const auto l = gp.complete.entity_id(raw.entity_name(t.tail));
    if (!r || !h || !l)
      throw DataError("observable graph uses a name absent from the complete graph: " +
                      raw.relation_name(t.rel) + "(" + raw.entity_name(t.head) + ", " +
                      raw.entity_name(t.tail) + ")");
    facts.push_back({*r, *h, *l});
  }
  gp.obs = KnowledgeGraph::from_data(gp.complete.entity_names(), gp.complete.relation_names(),
                                     facts);
  if (!gp.obs.is_subgraph_of(gp.complete))
    throw DataError("--graph holds a fact missing from --graph-complete");
  gp.has_complete = true;
  return gp;
}

// Owns whichever predictor stack the --predictor flag selects. Tabular and
// noisy scores are augmented with the observable graph (observed facts clamp
// to 1) so observed structure always counts as certain.
struct PredictorBundle {
  std::unique_ptr<TabularPredictor> table;
  std::unique_ptr<PerfectPredictor> perfect;
  std::unique_ptr<AugmentedPredictor> augmented;
  const LinkPredictor* pi = nullptr;
};

PredictorBundle make_predictor(const std::string& spec, const GraphPair& gp,
                               std::uint64_t seed, bool require_complete) {
  PredictorBundle b;
  if (spec == "perfect") {
    if (require_complete && !gp.has_complete)
      throw UsageError("--predictor perfect requires --graph-complete");
    b.perfect = std::make_unique<PerfectPredictor>(gp.complete);
    b.pi = b.perfect.get();
  } else if (spec.rfind("noisy:", 0) == 0) {
    double rate = 0.0;
    try {
      std::size_t pos = 0;
      const std::string arg = spec.substr(6);
      rate = std::stod(arg, &pos);
      if (pos != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      throw UsageError("malformed --predictor '" + spec + "' (expected noisy:<rate>)");
    }
    b.table = std::make_unique<TabularPredictor>(noisy_perfect(gp.complete, rate, seed));
    b.augmented = std::make_unique<AugmentedPredictor>(*b.table, gp.obs);
    b.pi = b.augmented.get();
  } else if (spec.rfind("tabular:", 0) == 0) {
    const std::string path = spec.substr(8);
    if (path.empty()) throw UsageError("--predictor tabular needs a file path");
    b.table = std::make_unique<TabularPredictor>(TabularPredictor::load_file(path, gp.complete));
    b.augmented = std::make_unique<AugmentedPredictor>(*b.table, gp.obs);
    b.pi = b.augmented.get();
  } else {
    throw UsageError("unknown --predictor '" + spec +
                     "' (expected perfect, tabular:<path>, or noisy:<rate>)");
  }
  return b;
}

PolicyParameters load_or_init_policy(const std::string& ckpt, int hidden_dim,
                                     std::uint64_t seed) {
  if (!ckpt.empty()) return load_policy_file(ckpt);
  return init_policy(hidden_dim, hidden_dim, seed);
}

// Index-addressed parallel map; results land by index so output order never
// depends on the worker count.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  const int workers = std::min(jobs, n);
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << body;
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  std::string graph;
  int batches = 1000;
  int batch_size = 4;
  int t_train = 15;
  double gamma = 0.75;
  double lr = 5e-6;
  int hidden_dim = 32;
  std::uint64_t seed = 0;
  std::string out;
  std::string log = "-";
  int log_every = 1;
  std::vector<std::string> mix;
  std::string pe_mode = "exact";
  int checkpoint_every = 0;
  std::string resume;
  int start_batch = 0;
};

int cmd_train(const TrainFlags& f) {
  if (f.start_batch < 0 || f.start_batch >= f.batches)
    throw UsageError("--start-batch must lie in [0, --batches)");
  if (!f.resume.empty() && f.start_batch == 0)
    std::cerr << "note: --resume without --start-batch restarts from batch 0\n";
  const KnowledgeGraph g = KnowledgeGraph::load_triples_file(f.graph);

  TrainConfig cfg;
  cfg.t_train = f.t_train;
  cfg.gamma = f.gamma;
  cfg.lr = f.lr;
  cfg.batch_size = f.batch_size;
  cfg.num_batches = f.batches;
  cfg.start_batch = f.start_batch;
  cfg.seed = f.seed;
  cfg.pe_mode = parse_pe_mode(f.pe_mode);
  if (!f.mix.empty()) cfg.mix = f.mix;
  cfg.log_every = f.log_every;
  cfg.checkpoint_every = f.checkpoint_every;
  cfg.checkpoint_path = f.out;

  PolicyParameters params = f.resume.empty() ? init_policy(f.hidden_dim, f.hidden_dim, f.seed)
                                             : load_policy_file(f.resume);

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (f.log != "-") {
    log_file.open(f.log);
    if (!log_file) throw DataError("cannot open log file: " + f.log);
    log = &log_file;
  }
  params = train(g, cfg, std::move(params), log);
  save_policy_file(f.out, params);
  std::ostream& status = (f.log == "-") ? std::cerr : std::cout;
  status << "trained " << (f.batches - f.start_batch) << " batches, checkpoint: " << f.out
         << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateFlags {
  std::string graph;
  std::string graph_complete;
  std::string task = "qac";
  int count = 0;
  int arity = 1;
  std::string preset;
  std::uint64_t seed = 0;
  std::string out;
  GenParams params;  // filled from preset, then explicit overrides
};

int cmd_generate(const GenerateFlags& f) {
  if (f.task != "qac" && f.task != "qar")
    throw UsageError("unknown --task '" + f.task + "' (expected qac or qar)");
  const GraphPair gp = load_graphs(f.graph, f.graph_complete);
  GenStats stats;
  int written = 0;
  if (f.task == "qac") {
    const auto insts = generate_qac(gp.obs, gp.complete, f.params, f.count, f.seed, &stats);
    write_qac_file(f.out, insts);
    written = static_cast<int>(insts.size());
  } else {
    const auto insts =
        generate_qar(gp.obs, gp.complete, f.params, f.count, f.arity, f.seed, &stats);
    write_qar_file(f.out, insts);
    written = static_cast<int>(insts.size());
  }
  std::cout << "wrote " << written << " " << f.task << " instances to " << f.out
            << " (restarts=" << stats.restarts << ", hub_shortfalls=" << stats.hub_shortfalls
            << ", observable_rejections=" << stats.observable_rejections
            << ", growth_dead_ends=" << stats.growth_dead_ends
            << ", candidate_rejections=" << stats.candidate_rejections << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval-qac / eval-qar

struct EvalFlags {
  std::string instances;
  std::string graph;
  std::string graph_complete;
  std::string policy;
  int hidden_dim = 32;
  std::string predictor = "perfect";
  int steps = 20;
  double timeout = 60.0;
  double oracle_timeout = 30.0;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string pe_mode = "exact";
  std::string out;
};

nlohmann::json eval_report_header(const char* task, const EvalFlags& f, int count) {
  return nlohmann::json{{"task", task},
                        {"instances", f.instances},
                        {"count", count},
                        {"steps", f.steps},
                        {"timeout", f.timeout},
                        {"seed", f.seed},
                        {"jobs", f.jobs},
                        {"predictor", f.predictor},
                        {"pe_mode", f.pe_mode},
                        {"policy", f.policy.empty() ? std::string("random-init") : f.policy}};
}

int cmd_eval_qac(const EvalFlags& f) {
  const GraphPair gp = load_graphs(f.graph, f.graph_complete);
  const PredictorBundle pred = make_predictor(f.predictor, gp, f.seed, true);
  const PolicyParameters params = load_or_init_policy(f.policy, f.hidden_dim, f.seed);
  const std::vector<QACInstance> data = read_qac_file(f.instances);
  const int n = static_cast<int>(data.size());
  const PEMode pe = parse_pe_mode(f.pe_mode);

  std::vector<QacPrediction> preds(static_cast<std::size_t>(n));
  parallel_for(n, f.jobs, [&](int i) {
    Rng ir = derive_rng(f.seed, static_cast<std::uint64_t>(i));
    SearchConfig sc;
    sc.steps = f.steps;
    sc.timeout_sec = f.timeout;
    sc.pe_mode = pe;
    const auto t0 = std::chrono::steady_clock::now();
    QacPrediction p;
    for (const auto* list : {&data[i].correct, &data[i].wrong}) {
      for (const std::string& name : *list) {
        if (f.timeout > 0 && seconds_since(t0) >= f.timeout) {
          p.timed_out = true;
          break;
        }
        sc.seed = ir();
        if (solve_qac(params, data[i].query, {name}, gp.obs, *pred.pi, sc))
          p.accepted.push_back(name);
      }
      if (p.timed_out) break;
    }
    preds[i] = std::move(p);
  });

  const MetricsReport report = f1_qac(data, preds);
  std::cout << metrics_to_text(report);
  if (!f.out.empty()) {
    nlohmann::json j = eval_report_header("qac", f, n);
    j["metrics"] = metrics_to_json(report);
    nlohmann::json results = nlohmann::json::array();
    for (int i = 0; i < n; ++i)
      results.push_back({{"index", i},
                         {"accepted", preds[i].accepted},
                         {"timed_out", preds[i].timed_out}});
    j["results"] = std::move(results);
    write_text_file(f.out, j.dump(2) + "\n");
  }
  return kOk;
}

int cmd_eval_qar(const EvalFlags& f) {
  if (f.graph_complete.empty())
    throw UsageError("eval-qar needs --graph-complete to verify answers");
  const GraphPair gp = load_graphs(f.graph, f.graph_complete);
  const PredictorBundle pred = make_predictor(f.predictor, gp, f.seed, true);
  const PolicyParameters params = load_or_init_policy(f.policy, f.hidden_dim, f.seed);
  const std::vector<QARInstance> data = read_qar_file(f.instances);
  const int n = static_cast<int>(data.size());
  const PEMode pe = parse_pe_mode(f.pe_mode);

  std::vector<QarPrediction> preds(static_cast<std::size_t>(n));
  parallel_for(n, f.jobs, [&](int i) {
    Rng ir = derive_rng(f.seed, static_cast<std::uint64_t>(i));
    SearchConfig sc;
    sc.steps = f.steps;
    sc.timeout_sec = f.timeout;
    sc.pe_mode = pe;
    sc.seed = ir();
    const auto t0 = std::chrono::steady_clock::now();
    const QarAnswer ans = solve_qar(params, data[i].query, gp.obs, *pred.pi, sc);
    QarPrediction p;
    p.answered = ans.found;
    p.tuple = ans.tuple;
    p.timed_out = !ans.found && f.timeout > 0 && seconds_since(t0) >= f.timeout;
    preds[i] = std::move(p);
  });

  const MetricsReport report = f1_qar(data, preds, gp.complete, f.oracle_timeout);
  std::cout << metrics_to_text(report);
  if (!f.out.empty()) {
    nlohmann::json j = eval_report_header("qar", f, n);
    j["metrics"] = metrics_to_json(report);
    nlohmann::json results = nlohmann::json::array();
    for (int i = 0; i < n; ++i)
      results.push_back({{"index", i},
                         {"answered", preds[i].answered},
                         {"tuple", preds[i].tuple},
                         {"timed_out", preds[i].timed_out}});
    j["results"] = std::move(results);
    write_text_file(f.out, j.dump(2) + "\n");
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// solve

struct SolveFlags {
  std::string graph;
  std::string graph_complete;
  std::string query;
  std::vector<std::string> candidate;
  bool candidate_given = false;
  std::string policy;
  int hidden_dim = 32;
  std::string predictor = "perfect";
  int steps = 200;
  double timeout = 60.0;
  std::uint64_t seed = 0;
  std::string pe_mode = "exact";
};

int cmd_solve(const SolveFlags& f) {
  const GraphPair gp = load_graphs(f.graph, f.graph_complete);
  // Without a complete graph the observable graph is its own completion, so
  // a perfect predictor over it is plain classical solving.
  const PredictorBundle pred = make_predictor(f.predictor, gp, f.seed, false);
  const PolicyParameters params = load_or_init_policy(f.policy, f.hidden_dim, f.seed);

  DNFQuery q;
  try {
    q = parse_query(f.query);
  } catch (const ParseError& e) {
    std::cerr << "parse error at line " << e.line << ", column " << e.column << ": " << e.what()
              << "\n";
    std::istringstream in(f.query);
    std::string line;
    for (int no = 1; std::getline(in, line); ++no) {
      if (no != e.line) continue;
      std::cerr << "  " << line << "\n  " << std::string(std::max(0, e.column - 1), ' ')
                << "^\n";
      break;
    }
    return kData;
  }

  SearchConfig sc;
  sc.steps = f.steps;
  sc.timeout_sec = f.timeout;
  sc.pe_mode = parse_pe_mode(f.pe_mode);
  sc.seed = f.seed;

  if (f.candidate_given) {
    // Mirror of solve_qac, keeping the per-disjunct scores for the report.
    double best = 0.0;
    for (std::size_t j = 0; j < q.disjuncts.size(); ++j) {
      const ConjunctiveQuery grounded = ground(q.disjuncts[j], f.candidate);
      const BoundQuery bq = bind(grounded, gp.obs);
      SearchConfig c = sc;
      c.seed = derive_rng(sc.seed, j)();
      const SearchResult res = run_search(params, bq, gp.obs, *pred.pi, c);
      best = std::max(best, res.score);
      if (best > 0.5) break;
    }
    std::cout << (best > 0.5 ? "true " : "false ") << fmt_score(best) << "\n";
    return kOk;
  }

  const QarAnswer ans = solve_qar(params, q, gp.obs, *pred.pi, sc);
  if (q.free_vars().empty()) {
    std::cout << (ans.found ? "true " : "false ") << fmt_score(ans.score) << "\n";
  } else if (ans.found) {
    for (std::size_t k = 0; k < ans.tuple.size(); ++k)
      std::cout << (k ? " " : "") << ans.tuple[k];
    std::cout << " " << fmt_score(ans.score) << "\n";
  } else {
    std::cout << "None " << fmt_score(ans.score) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// profile

struct ProfileFlags {
  std::vector<int> sizes = {50, 100, 150, 200};
  int queries = 4;
  int steps = 30;
  int hidden_dim = 32;
  int relations = 3;
  int fact_factor = 6;
  std::uint64_t seed = 0;
  std::string source = "templates";
  std::vector<std::string> tags;
  std::vector<int> hub_nmin = {6, 10, 14, 18};
  std::string out;
};

KnowledgeGraph random_graph(int ne, int nr, int nf, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0x9e3779b9);
  std::vector<std::string> ents(static_cast<std::size_t>(ne));
  std::vector<std::string> rels(static_cast<std::size_t>(nr));
  for (int i = 0; i < ne; ++i) ents[static_cast<std::size_t>(i)] = "e" + std::to_string(i);
  for (int i = 0; i < nr; ++i) rels[static_cast<std::size_t>(i)] = "r" + std::to_string(i);
  std::unordered_set<std::uint64_t> seen;
  std::vector<Triple> facts;
  const int cap = std::min<long long>(nf, 1LL * nr * ne * ne);
  while (static_cast<int>(facts.size()) < cap) {
    Triple t;
    t.rel = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(nr)));
    t.head = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ne)));
    t.tail = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ne)));
    const std::uint64_t key = (static_cast<std::uint64_t>(t.rel) << 42) ^
                              (static_cast<std::uint64_t>(t.head) << 21) ^
                              static_cast<std::uint64_t>(t.tail);
    if (seen.insert(key).second) facts.push_back(t);
  }
  return KnowledgeGraph::from_data(std::move(ents), std::move(rels), facts);
}

int cmd_profile(const ProfileFlags& f) {
  if (f.source != "templates" && f.source != "hub")
    throw UsageError("unknown --source '" + f.source + "' (expected templates or hub)");
  const std::vector<std::string> tags =
      f.tags.empty() ? std::vector<std::string>{"1p", "2p", "3p", "2i", "3i", "pi", "ip", "2in",
                                                "3in", "inp", "pin"}
                     : f.tags;
  const PolicyParameters params = init_policy(f.hidden_dim, f.hidden_dim, f.seed);

  std::vector<double> xs, ys, qsize, ynorm;
  nlohmann::json out_rows = nlohmann::json::array();
  std::string text;
  std::uint64_t item = 0;
  for (const int ne : f.sizes) {
    if (ne < 5) throw UsageError("--sizes entries must be at least 5");
    const KnowledgeGraph complete =
        random_graph(ne, f.relations, f.fact_factor * ne, f.seed ^ static_cast<std::uint64_t>(ne));
    KnowledgeGraph domain = complete;
    if (f.source == "hub") {
      // Observable copy with a slice of facts missing, as hub sampling needs.
      Rng drop_rng = derive_rng(f.seed, static_cast<std::uint64_t>(ne) + 0xD09);
      std::vector<Triple> kept;
      for (const Triple& t : complete.facts())
        if (uniform_double(drop_rng) >= 0.07) kept.push_back(t);
      domain = KnowledgeGraph::from_data(complete.entity_names(), complete.relation_names(),
                                         kept);
    }
    const PerfectPredictor pi(complete);

    // One work item per (shape, repeat): a template tag or a hub n_min value.
    std::vector<std::pair<int, int>> plan;
    const int shapes = f.source == "hub" ? static_cast<int>(f.hub_nmin.size())
                                         : static_cast<int>(tags.size());
    for (int s = 0; s < shapes; ++s)
      for (int rep = 0; rep < f.queries; ++rep) plan.emplace_back(s, rep);

    std::vector<TimingSample> samples;
    for (const auto& [s, rep] : plan) {
      Rng rng = derive_rng(f.seed, item++);
      ConjunctiveQuery q;
      bool ok = false;
      for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
        try {
          if (f.source == "hub") {
            GenParams gen;
            gen.n_min = f.hub_nmin[static_cast<std::size_t>(s)];
            q = sample_base_query(domain, complete, gen, rng);
          } else {
            q = sample_training_query(domain, tags[static_cast<std::size_t>(s)], rng);
          }
          ok = true;
        } catch (const DataError&) {
          if (attempt + 1 == 50) throw;
        }
      }
      const BoundQuery bq = bind(existentially_close(q), domain);
      const CompGraph cg(bq, domain.num_entities());
      SearchConfig sc;
      sc.steps = f.steps;
      sc.timeout_sec = 0;  // profiling wants every step
      sc.seed = rng();
      const SearchResult res = run_search(params, bq, domain, pi, sc);
      samples.push_back({cg.num_vars(), cg.num_literals(), cg.vertex_count(), cg.edge_count(),
                         res.step_seconds});
      if (!res.step_seconds.empty()) {
        double mean = 0;
        for (double sec : res.step_seconds) mean += sec;
        mean /= static_cast<double>(res.step_seconds.size());
        const double size_metric = cg.num_vars() + 2.0 * cg.num_literals();
        xs.push_back(static_cast<double>(ne) * size_metric);
        ys.push_back(mean);
        qsize.push_back(size_metric);
        ynorm.push_back(mean / size_metric);
      }
    }
    const std::vector<TimingRow> rows = timing_profile(samples);
    text += "|V| = " + std::to_string(ne) + "\n" + timing_to_text(rows);
    for (const TimingRow& r : rows) {
      nlohmann::json jr = timing_to_json({r})[0];
      jr["entities"] = ne;
      out_rows.push_back(std::move(jr));
    }
  }

  const double r2 = linear_r2(xs, ys);
  const double rho = spearman_rho(qsize, ynorm);
  std::cout << text;
  std::cout << "linear_r2 (mean step seconds vs |V|*(vars+2*literals)): " << fmt_score(r2)
            << "\n";
  std::cout << "spearman_rho (normalized step seconds vs query size): " << fmt_score(rho)
            << "\n";
  if (!f.out.empty()) {
    nlohmann::json j{{"sizes", f.sizes},     {"queries_per_shape", f.queries},
                     {"steps", f.steps},     {"hidden_dim", f.hidden_dim},
                     {"seed", f.seed},       {"rows", std::move(out_rows)},
                     {"linear_r2", r2},      {"spearman_rho", rho}};
    write_text_file(f.out, j.dump(2) + "\n");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "anycq: answer existentially quantified conjunctive queries over incomplete\n"
      "knowledge graphs with a learned search policy scored against a link predictor."};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  TrainFlags tf;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a search policy on template-sampled queries");
  train_cmd->add_option("--graph", tf.graph, "training graph (TSV triples)")
      ->required();
  train_cmd->add_option("--batches", tf.batches, "number of training batches")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", tf.batch_size, "episodes per batch")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--T-train", tf.t_train, "policy steps per episode")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--gamma", tf.gamma, "reward discount");
  train_cmd->add_option("--lr", tf.lr, "Adam learning rate");
  train_cmd->add_option("--hidden-dim", tf.hidden_dim, "policy embedding width")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tf.seed, "random seed")->envname("ANYCQ_SEED");
  train_cmd->add_option("--out", tf.out, "checkpoint output path")->required();
  train_cmd->add_option("--log", tf.log, "metrics log path, '-' for stdout");
  train_cmd->add_option("--log-every", tf.log_every, "log every N batches")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--mix", tf.mix, "template tags to sample from")->delimiter(',');
  train_cmd->add_option("--pe-mode", tf.pe_mode, "PE labels: exact, cwa, or allone");
  train_cmd->add_option("--checkpoint-every", tf.checkpoint_every,
                        "save checkpoint every N batches (0 disables)");
  train_cmd->add_option("--resume", tf.resume, "checkpoint to resume from");
  train_cmd->add_option("--start-batch", tf.start_batch, "first batch index when resuming");

  GenerateFlags gf;
  CLI::App* gen_cmd =
      app.add_subcommand("generate", "Sample benchmark instances from a graph pair");
  gen_cmd->add_option("--graph", gf.graph, "observable graph (TSV triples)")
      ->required();
  gen_cmd->add_option("--graph-complete", gf.graph_complete, "complete graph (TSV triples)")
      ->required();
  gen_cmd->add_option("--task", gf.task, "instance kind: qac or qar");
  gen_cmd->add_option("--count", gf.count, "instances to generate")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--arity", gf.arity, "free variables per QAR instance (1-3)")
      ->check(CLI::Range(1, 3));
  CLI::Option* preset_opt =
      gen_cmd->add_option("--preset", gf.preset, "named split: 3hub, 4hub, or 5hub");
  gen_cmd->add_option("--seed", gf.seed, "random seed")->envname("ANYCQ_SEED");
  gen_cmd->add_option("--out", gf.out, "instance file to write (JSONL)")->required();
  CLI::Option* nhub_opt = gen_cmd->add_option("--n-hub", gf.params.n_hub, "hub count");
  CLI::Option* nmin_opt = gen_cmd->add_option("--n-min", gf.params.n_min, "minimum query size");
  CLI::Option* pconst_opt =
      gen_cmd->add_option("--p-const", gf.params.p_const, "constant substitution weight");
  CLI::Option* pout_opt =
      gen_cmd->add_option("--p-out", gf.params.p_out, "leaf removal probability");
  CLI::Option* retries_opt =
      gen_cmd->add_option("--max-retries", gf.params.max_retries, "restarts per instance");
  CLI::Option* otimeout_opt = gen_cmd->add_option(
      "--oracle-timeout", gf.params.oracle_timeout_sec, "seconds per labeling oracle call");

  EvalFlags qac_f;
  CLI::App* eval_qac_cmd =
      app.add_subcommand("eval-qac", "Classify candidate answers over an instance file");
  EvalFlags qar_f;
  qar_f.steps = 200;
  CLI::App* eval_qar_cmd =
      app.add_subcommand("eval-qar", "Retrieve answers over an instance file");
  for (auto [cmd, ef] : {std::pair{eval_qac_cmd, &qac_f}, std::pair{eval_qar_cmd, &qar_f}}) {
    cmd->add_option("--instances", ef->instances, "instance file (JSONL)")
        ->required();
    cmd->add_option("--graph", ef->graph, "observable graph (TSV triples)")
        ->required();
    cmd->add_option("--graph-complete", ef->graph_complete, "complete graph (TSV triples)");
    cmd->add_option("--policy", ef->policy, "policy checkpoint (default: random init)");
    cmd->add_option("--hidden-dim", ef->hidden_dim, "width for random-init policy")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--predictor", ef->predictor,
                    "link predictor: perfect, tabular:<path>, or noisy:<rate>");
    cmd->add_option("--steps", ef->steps, "search steps per query")->check(CLI::PositiveNumber);
    cmd->add_option("--timeout", ef->timeout, "seconds per instance (<= 0 disables)");
    cmd->add_option("--seed", ef->seed, "random seed")->envname("ANYCQ_SEED");
    cmd->add_option("--jobs", ef->jobs, "parallel workers")
        ->envname("ANYCQ_JOBS")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--pe-mode", ef->pe_mode, "PE labels: exact, cwa, or allone");
    cmd->add_option("--out", ef->out, "JSON report path");
  }
  eval_qar_cmd->add_option("--oracle-timeout", qar_f.oracle_timeout,
                           "seconds per answer verification");

  SolveFlags sf;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Answer one query given on the command line");
  solve_cmd->add_option("--graph", sf.graph, "observable graph (TSV triples)")
      ->required();
  solve_cmd->add_option("--graph-complete", sf.graph_complete, "complete graph (TSV triples)");
  solve_cmd->add_option("--query", sf.query, "query text")->required();
  CLI::Option* cand_opt =
      solve_cmd
          ->add_option("--candidate", sf.candidate,
                       "candidate answer tuple (comma separated); switches to classification")
          ->delimiter(',');
  solve_cmd->add_option("--policy", sf.policy, "policy checkpoint (default: random init)");
  solve_cmd->add_option("--hidden-dim", sf.hidden_dim, "width for random-init policy")
      ->check(CLI::PositiveNumber);
  solve_cmd->add_option("--predictor", sf.predictor,
                        "link predictor: perfect, tabular:<path>, or noisy:<rate>");
  solve_cmd->add_option("--steps", sf.steps, "search steps per disjunct")
      ->check(CLI::PositiveNumber);
  solve_cmd->add_option("--timeout", sf.timeout, "seconds per search (<= 0 disables)");
  solve_cmd->add_option("--seed", sf.seed, "random seed")->envname("ANYCQ_SEED");
  solve_cmd->add_option("--pe-mode", sf.pe_mode, "PE labels: exact, cwa, or allone");

  ProfileFlags pf;
  CLI::App* profile_cmd =
      app.add_subcommand("profile", "Measure step time across graph and query sizes");
  profile_cmd->add_option("--sizes", pf.sizes, "entity counts to sweep")->delimiter(',');
  profile_cmd->add_option("--queries", pf.queries, "queries per size and template")
      ->check(CLI::PositiveNumber);
  profile_cmd->add_option("--steps", pf.steps, "search steps per query")
      ->check(CLI::PositiveNumber);
  profile_cmd->add_option("--hidden-dim", pf.hidden_dim, "policy embedding width")
      ->check(CLI::PositiveNumber);
  profile_cmd->add_option("--relations", pf.relations, "relations in the synthetic graphs")
      ->check(CLI::PositiveNumber);
  profile_cmd->add_option("--fact-factor", pf.fact_factor, "facts per entity")
      ->check(CLI::PositiveNumber);
  profile_cmd->add_option("--seed", pf.seed, "random seed")->envname("ANYCQ_SEED");
  profile_cmd->add_option("--source", pf.source,
                          "query source: templates, or hub for benchmark-style queries");
  profile_cmd->add_option("--tags", pf.tags, "template tags to include")->delimiter(',');
  profile_cmd->add_option("--hub-nmin", pf.hub_nmin, "query sizes for --source hub")
      ->delimiter(',');
  profile_cmd->add_option("--out", pf.out, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(tf);
    if (gen_cmd->parsed()) {
      if (!gf.preset.empty()) {
        GenParams base = gen_preset(gf.preset);
        if (!nhub_opt->count()) gf.params.n_hub = base.n_hub;
        if (!nmin_opt->count()) gf.params.n_min = base.n_min;
        if (!pconst_opt->count()) gf.params.p_const = base.p_const;
        if (!pout_opt->count()) gf.params.p_out = base.p_out;
        if (!retries_opt->count()) gf.params.max_retries = base.max_retries;
        if (!otimeout_opt->count()) gf.params.oracle_timeout_sec = base.oracle_timeout_sec;
      }
      (void)preset_opt;
      return cmd_generate(gf);
    }
    if (eval_qac_cmd->parsed()) return cmd_eval_qac(qac_f);
    if (eval_qar_cmd->parsed()) return cmd_eval_qar(qar_f);
    if (solve_cmd->parsed()) {
      sf.candidate_given = cand_opt->count() > 0;
      return cmd_solve(sf);
    }
    if (profile_cmd->parsed()) return cmd_profile(pf);
    std::cerr << "no subcommand given\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << " (line " << e.line << ", column " << e.column
              << ")\n";
    return kData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
}
