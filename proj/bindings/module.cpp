// Python bindings for the main engine operations.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <anycq/benchgen.hpp>
#include <anycq/errors.hpp>
#include <anycq/instances.hpp>
#include <anycq/kg.hpp>
#include <anycq/metrics.hpp>
#include <anycq/oracle.hpp>
#include <anycq/policy.hpp>
#include <anycq/predictor.hpp>
#include <anycq/query.hpp>
#include <anycq/search.hpp>
#include <anycq/trainer.hpp>

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace anycq;

namespace {

std::vector<Triple> triples_from_tuples(const std::vector<std::tuple<int, int, int>>& facts) {
  std::vector<Triple> out;
  out.reserve(facts.size());
  for (const auto& [r, h, t] : facts) out.push_back({r, h, t});
  return out;
}

// Oracle over a DNF query: per-disjunct solves with merged answer sets,
// reported as entity names.
py::dict oracle_answers(const DNFQuery& q, const KnowledgeGraph& g, std::uint64_t max_nodes,
                        double timeout_sec) {
  OracleConfig cfg;
  cfg.mode = OracleMode::AllAnswers;
  cfg.max_nodes = max_nodes;
  cfg.timeout_sec = timeout_sec;
  bool satisfiable = false;
  bool exhausted = true;
  bool timed_out = false;
  std::uint64_t nodes = 0;
  std::set<std::vector<int>> merged;
  for (const ConjunctiveQuery& d : q.disjuncts) {
    const OracleResult r = oracle_solve(d, g, cfg);
    satisfiable = satisfiable || r.satisfiable;
    exhausted = exhausted && r.exhausted;
    timed_out = timed_out || r.timed_out;
    nodes += r.nodes;
    merged.insert(r.answers.begin(), r.answers.end());
  }
  py::list answers;
  for (const std::vector<int>& tup : merged) {
    py::list names;
    for (int id : tup) names.append(g.entity_name(id));
    answers.append(std::move(names));
  }
  py::dict out;
  out["satisfiable"] = satisfiable;
  out["answers"] = std::move(answers);
  out["exhausted"] = exhausted;
  out["timed_out"] = timed_out;
  out["nodes"] = nodes;
  return out;
}

}  // namespace

PYBIND11_MODULE(_anycq, m) {
  m.doc() = "Conjunctive query answering over incomplete knowledge graphs";
  m.attr("__version__") = "0.1.0";

  const py::object data_error = py::register_exception<DataError>(m, "DataError");
  py::register_exception<ParseError>(m, "QueryParseError", data_error.ptr());

  py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
      .def_static("load_triples_file", &KnowledgeGraph::load_triples_file, py::arg("path"))
      .def_static(
          "load_triples_text",
          [](const std::string& text) {
            std::istringstream in(text);
            return KnowledgeGraph::load_triples(in);
          },
          py::arg("text"))
      .def_static(
          "from_data",
          [](std::vector<std::string> entities, std::vector<std::string> relations,
             const std::vector<std::tuple<int, int, int>>& facts) {
            return KnowledgeGraph::from_data(std::move(entities), std::move(relations),
                                             triples_from_tuples(facts));
          },
          py::arg("entities"), py::arg("relations"), py::arg("facts"),
          "facts are (relation, head, tail) id triples")
      .def_property_readonly("num_entities", &KnowledgeGraph::num_entities)
      .def_property_readonly("num_relations", &KnowledgeGraph::num_relations)
      .def("__len__", [](const KnowledgeGraph& g) { return g.facts().size(); })
      .def("entity_names", &KnowledgeGraph::entity_names)
      .def("relation_names", &KnowledgeGraph::relation_names)
      .def("entity_name", &KnowledgeGraph::entity_name, py::arg("id"))
      .def("relation_name", &KnowledgeGraph::relation_name, py::arg("id"))
      .def(
          "entity_id",
          [](const KnowledgeGraph& g, const std::string& name) -> std::optional<int> {
            return g.entity_id(name);
          },
          py::arg("name"))
      .def(
          "relation_id",
          [](const KnowledgeGraph& g, const std::string& name) -> std::optional<int> {
            return g.relation_id(name);
          },
          py::arg("name"))
      .def("contains_fact", &KnowledgeGraph::contains_fact, py::arg("relation"),
           py::arg("head"), py::arg("tail"))
      .def("is_subgraph_of", &KnowledgeGraph::is_subgraph_of, py::arg("other"))
      .def("facts", [](const KnowledgeGraph& g) {
        std::vector<std::tuple<int, int, int>> out;
        out.reserve(g.facts().size());
        for (const Triple& t : g.facts()) out.emplace_back(t.rel, t.head, t.tail);
        return out;
      });

  py::class_<DNFQuery>(m, "Query")
      .def_property_readonly("free_vars", &DNFQuery::free_vars)
      .def_property_readonly("num_disjuncts",
                             [](const DNFQuery& q) { return q.disjuncts.size(); })
      .def("__str__", [](const DNFQuery& q) { return print_query(q); })
      .def("__eq__", [](const DNFQuery& a, const DNFQuery& b) { return a == b; });

  m.def("parse_query", &parse_query, py::arg("text"));
  m.def("print_query", py::overload_cast<const DNFQuery&>(&print_query), py::arg("query"));
  m.def("ground", py::overload_cast<const DNFQuery&, const std::vector<std::string>&>(&ground),
        py::arg("query"), py::arg("entities"),
        "Substitute entities for the free variables positionally");

  py::class_<LinkPredictor>(m, "LinkPredictor");
  py::class_<PerfectPredictor, LinkPredictor>(m, "PerfectPredictor")
      .def(py::init<const KnowledgeGraph&>(), py::arg("graph"), py::keep_alive<1, 2>())
      .def("score", &PerfectPredictor::score, py::arg("relation"), py::arg("head"),
           py::arg("tail"));
  py::class_<TabularPredictor, LinkPredictor>(m, "TabularPredictor")
      .def(py::init<>())
      .def("set", &TabularPredictor::set, py::arg("relation"), py::arg("head"), py::arg("tail"),
           py::arg("prob"))
      .def("score", &TabularPredictor::score, py::arg("relation"), py::arg("head"),
           py::arg("tail"))
      .def("__len__", &TabularPredictor::size)
      .def_static("load_file", &TabularPredictor::load_file, py::arg("path"), py::arg("vocab"));
  py::class_<AugmentedPredictor, LinkPredictor>(m, "AugmentedPredictor")
      .def(py::init<const LinkPredictor&, const KnowledgeGraph&>(), py::arg("inner"),
           py::arg("observed"), py::keep_alive<1, 2>(), py::keep_alive<1, 3>())
      .def("score", &AugmentedPredictor::score, py::arg("relation"), py::arg("head"),
           py::arg("tail"));
  m.def("noisy_perfect", &noisy_perfect, py::arg("graph"), py::arg("flip_rate"), py::arg("seed"),
        "Perfect scores of `graph` corrupted by reflecting a fraction across 0.5");

  py::enum_<PEMode>(m, "PEMode")
      .value("EXACT", PEMode::Exact)
      .value("CWA", PEMode::CWA)
      .value("ALL_ONE", PEMode::AllOne);

  py::class_<PolicyParameters>(m, "PolicyParameters")
      .def_readonly("d", &PolicyParameters::d)
      .def_readonly("hidden", &PolicyParameters::hidden);
  m.def("init_policy", &init_policy, py::arg("d"), py::arg("hidden"), py::arg("seed"));
  m.def("save_policy_file", &save_policy_file, py::arg("path"), py::arg("params"));
  m.def("load_policy_file", &load_policy_file, py::arg("path"));

  py::class_<SearchConfig>(m, "SearchConfig")
      .def(py::init([](int steps, double timeout_sec, PEMode pe_mode, std::uint64_t seed) {
             SearchConfig c;
             c.steps = steps;
             c.timeout_sec = timeout_sec;
             c.pe_mode = pe_mode;
             c.seed = seed;
             return c;
           }),
           py::arg("steps") = 200, py::arg("timeout_sec") = 60.0,
           py::arg("pe_mode") = PEMode::Exact, py::arg("seed") = 0)
      .def_readwrite("steps", &SearchConfig::steps)
      .def_readwrite("timeout_sec", &SearchConfig::timeout_sec)
      .def_readwrite("pe_mode", &SearchConfig::pe_mode)
      .def_readwrite("seed", &SearchConfig::seed);

  py::class_<QarAnswer>(m, "QarAnswer")
      .def_readonly("found", &QarAnswer::found)
      .def_readonly("tuple", &QarAnswer::tuple)
      .def_readonly("score", &QarAnswer::score)
      .def_readonly("disjunct", &QarAnswer::disjunct)
      .def("__bool__", [](const QarAnswer& a) { return a.found; })
      .def("__repr__", [](const QarAnswer& a) {
        if (!a.found) return std::string("QarAnswer(None)");
        std::string s = "QarAnswer((";
        for (std::size_t i = 0; i < a.tuple.size(); ++i)
          s += (i ? ", " : "") + a.tuple[i];
        return s + "), score=" + std::to_string(a.score) + ")";
      });

  m.def("solve_qac", &solve_qac, py::arg("params"), py::arg("query"), py::arg("answer"),
        py::arg("graph"), py::arg("predictor"), py::arg("config") = SearchConfig{},
        py::call_guard<py::gil_scoped_release>(),
        "True when some disjunct grounded with `answer` scores above 0.5");
  m.def("solve_qar", &solve_qar, py::arg("params"), py::arg("query"), py::arg("graph"),
        py::arg("predictor"), py::arg("config") = SearchConfig{},
        py::call_guard<py::gil_scoped_release>(),
        "Best answer tuple of the query, or None when nothing clears 0.5");

  m.def("oracle_answers", &oracle_answers, py::arg("query"), py::arg("graph"),
        py::arg("max_nodes") = 0, py::arg("timeout_sec") = 0.0,
        "Classical answer enumeration by backtracking join");
  m.def("oracle_verifies", &oracle_verifies, py::arg("query"), py::arg("answer"),
        py::arg("graph"), py::arg("timeout_sec") = 0.0);

  py::class_<QACInstance>(m, "QACInstance")
      .def_readonly("query", &QACInstance::query)
      .def_readonly("correct", &QACInstance::correct)
      .def_readonly("wrong", &QACInstance::wrong)
      .def_readonly("hard", &QACInstance::hard);
  py::class_<QARInstance>(m, "QARInstance")
      .def_readonly("query", &QARInstance::query)
      .def_readonly("answers", &QARInstance::answers)
      .def_readonly("has_trivial", &QARInstance::has_trivial);
  m.def("read_qac_file", &read_qac_file, py::arg("path"));
  m.def("write_qac_file", &write_qac_file, py::arg("path"), py::arg("instances"));
  m.def("read_qar_file", &read_qar_file, py::arg("path"));
  m.def("write_qar_file", &write_qar_file, py::arg("path"), py::arg("instances"));

  py::class_<ConjunctiveQuery>(m, "ConjunctiveQuery")
      .def_readonly("free_vars", &ConjunctiveQuery::free_vars)
      .def_readonly("exist_vars", &ConjunctiveQuery::exist_vars)
      .def("__str__", [](const ConjunctiveQuery& q) { return print_query(q); })
      .def("__eq__", [](const ConjunctiveQuery& a, const ConjunctiveQuery& b) { return a == b; });
  m.def("as_query", [](const ConjunctiveQuery& q) { return DNFQuery{{q}}; },
        py::arg("disjunct"), "Wrap one conjunctive query as a single-disjunct query");

  py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed"));
  m.def("sample_training_query", &sample_training_query, py::arg("graph"), py::arg("tag"),
        py::arg("rng"), "One training query from a named template family");
  m.def(
      "try_make_qac_instance",
      [](const ConjunctiveQuery& q, const KnowledgeGraph& g, const KnowledgeGraph& g_tilde,
         Rng& rng, double oracle_timeout_sec) {
        return try_make_qac_instance(q, g, g_tilde, rng, oracle_timeout_sec);
      },
      py::arg("query"), py::arg("graph"), py::arg("graph_complete"), py::arg("rng"),
      py::arg("oracle_timeout_sec") = 30.0,
      "Label a one-free-variable query; None when rejected");

  py::class_<GenParams>(m, "GenParams")
      .def(py::init<>())
      .def_readwrite("n_hub", &GenParams::n_hub)
      .def_readwrite("n_min", &GenParams::n_min)
      .def_readwrite("p_const", &GenParams::p_const)
      .def_readwrite("p_out", &GenParams::p_out)
      .def_readwrite("max_retries", &GenParams::max_retries)
      .def_readwrite("max_hub_retries", &GenParams::max_hub_retries)
      .def_readwrite("oracle_timeout_sec", &GenParams::oracle_timeout_sec);
  m.def("gen_preset", &gen_preset, py::arg("name"));
  m.def(
      "generate_qac",
      [](const KnowledgeGraph& g, const KnowledgeGraph& g_tilde, const GenParams& params,
         int count, std::uint64_t seed) { return generate_qac(g, g_tilde, params, count, seed); },
      py::arg("graph"), py::arg("graph_complete"), py::arg("params"), py::arg("count"),
      py::arg("seed"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "generate_qar",
      [](const KnowledgeGraph& g, const KnowledgeGraph& g_tilde, const GenParams& params,
         int count, int arity, std::uint64_t seed) {
        return generate_qar(g, g_tilde, params, count, arity, seed);
      },
      py::arg("graph"), py::arg("graph_complete"), py::arg("params"), py::arg("count"),
      py::arg("arity") = 1, py::arg("seed") = 0, py::call_guard<py::gil_scoped_release>());

  py::class_<QacPrediction>(m, "QacPrediction")
      .def(py::init([](std::vector<std::string> accepted, bool timed_out) {
             QacPrediction p;
             p.accepted = std::move(accepted);
             p.timed_out = timed_out;
             return p;
           }),
           py::arg("accepted") = std::vector<std::string>{}, py::arg("timed_out") = false)
      .def_readwrite("accepted", &QacPrediction::accepted)
      .def_readwrite("timed_out", &QacPrediction::timed_out);
  py::class_<QarPrediction>(m, "QarPrediction")
      .def(py::init([](std::optional<std::vector<std::string>> tuple, bool timed_out) {
             QarPrediction p;
             p.answered = tuple.has_value();
             if (tuple) p.tuple = std::move(*tuple);
             p.timed_out = timed_out;
             return p;
           }),
           py::arg("tuple") = std::nullopt, py::arg("timed_out") = false)
      .def_readwrite("answered", &QarPrediction::answered)
      .def_readwrite("tuple", &QarPrediction::tuple)
      .def_readwrite("timed_out", &QarPrediction::timed_out);

  py::class_<MetricsRow>(m, "MetricsRow")
      .def_readonly("label", &MetricsRow::label)
      .def_readonly("instances", &MetricsRow::instances)
      .def_readonly("easy", &MetricsRow::easy)
      .def_readonly("hard", &MetricsRow::hard)
      .def_readonly("f1", &MetricsRow::f1)
      .def_readonly("precision", &MetricsRow::precision)
      .def_readonly("recall", &MetricsRow::recall)
      .def_readonly("easy_recall", &MetricsRow::easy_recall)
      .def_readonly("hard_recall", &MetricsRow::hard_recall)
      .def_readonly("timeouts", &MetricsRow::timeouts);
  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("total", &MetricsReport::total)
      .def_readonly("per_arity", &MetricsReport::per_arity)
      .def("__str__", [](const MetricsReport& r) { return metrics_to_text(r); })
      .def("to_json", [](const MetricsReport& r) { return metrics_to_json(r).dump(); });
  m.def("f1_qac", &f1_qac, py::arg("instances"), py::arg("predictions"));
  m.def("f1_qar", &f1_qar, py::arg("instances"), py::arg("predictions"),
        py::arg("graph_complete"), py::arg("oracle_timeout_sec") = 0.0);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("t_train", &TrainConfig::t_train)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("num_batches", &TrainConfig::num_batches)
      .def_readwrite("start_batch", &TrainConfig::start_batch)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("pe_mode", &TrainConfig::pe_mode)
      .def_readwrite("mix", &TrainConfig::mix)
      .def_readwrite("log_every", &TrainConfig::log_every)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
      .def_readwrite("checkpoint_path", &TrainConfig::checkpoint_path);
  m.def(
      "train",
      [](const KnowledgeGraph& g, const TrainConfig& cfg, const PolicyParameters& params,
         const std::optional<std::string>& log_path) {
        std::ofstream log_file;
        std::ostream* log = nullptr;
        if (log_path) {
          log_file.open(*log_path);
          if (!log_file) throw DataError("cannot open log file: " + *log_path);
          log = &log_file;
        }
        PolicyParameters p = params;
        py::gil_scoped_release release;
        return train(g, cfg, std::move(p), log);
      },
      py::arg("graph"), py::arg("config"), py::arg("params"), py::arg("log_path") = std::nullopt,
      "REINFORCE training on template-sampled queries; returns the updated parameters");
}
