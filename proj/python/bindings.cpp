#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "tpgn/corpus.hpp"
#include "tpgn/error.hpp"
#include "tpgn/lda.hpp"
#include "tpgn/metrics.hpp"
#include "tpgn/pipeline.hpp"
#include "tpgn/textrank.hpp"

namespace py = pybind11;
using namespace tpgn;
using corpus::Tokens;

namespace {

metrics::TopNMode parse_mode(const std::string& name) {
  for (auto m : {metrics::TopNMode::MeanOfBest, metrics::TopNMode::NthBest, metrics::TopNMode::MaxOfFirst}) {
    if (name == metrics::top_n_mode_name(m)) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown top_n mode '" + name + "'");
}

// Runs one pipeline command with the given key/value overrides; returns
// (exit code, stdout, stderr).
py::tuple run_command(const std::string& name, const std::map<std::string, std::string>& settings) {
  using Cmd = int (*)(const cli::RunConfig&, std::ostream&, std::ostream&);
  static const std::map<std::string, Cmd> commands = {{"prep", cli::cmd_prep},
                                                      {"lda", cli::cmd_lda},
                                                      {"train", cli::cmd_train},
                                                      {"generate", cli::cmd_generate},
                                                      {"evaluate", cli::cmd_evaluate}};
  const auto it = commands.find(name);
  if (it == commands.end()) throw Error(ErrorKind::InvalidArgument, "unknown command '" + name + "'");
  cli::RunConfig config;
  for (const auto& [k, v] : settings) config.set(k, v);
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = it->second(config, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_tpgn, m) {
  m.doc() = "Topic-aware pointer-generator comment generation";

  // The module attribute keeps the type alive.
  static PyObject* error_type = py::exception<Error>(m, "TpgnError", PyExc_RuntimeError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = error_kind_name(e.kind());
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.def("tokenize", &corpus::tokenize, py::arg("text"));

  m.def(
      "rank",
      [](const Tokens& tokens, std::size_t window, double damping, double tol, int max_iter) {
        const auto graph = textrank::build_graph(tokens, window);
        return textrank::rank_map(graph, {damping, tol, max_iter});
      },
      py::arg("tokens"), py::arg("window") = 5, py::arg("damping") = 0.85, py::arg("tol") = 1e-6,
      py::arg("max_iter") = 100);
  m.def(
      "extract_keywords",
      [](const Tokens& tokens, std::size_t k, std::size_t window) {
        textrank::KeywordOptions o;
        o.window = window;
        return textrank::extract_keywords(tokens, k, o);
      },
      py::arg("tokens"), py::arg("k"), py::arg("window") = 5);
  m.def(
      "sentence_keywords",
      [](const Tokens& title, const Tokens& body, std::size_t k) {
        corpus::Article a;
        a.title = title;
        a.body = body;
        return textrank::extract_sentence_keywords(a, k);
      },
      py::arg("title"), py::arg("body"), py::arg("k") = 3);

  py::class_<lda::TopicModel>(m, "TopicModel")
      .def_property_readonly("num_topics", &lda::TopicModel::num_topics)
      .def_property_readonly("vocabulary", &lda::TopicModel::vocabulary)
      .def_property_readonly("alpha", &lda::TopicModel::alpha)
      .def_property_readonly("beta", &lda::TopicModel::beta)
      .def("count", &lda::TopicModel::count, py::arg("word"), py::arg("topic"))
      .def("topic_words", [](const lda::TopicModel& t, std::size_t n) { return lda::topic_words(t, n); }, py::arg("n"))
      .def("embedding", [](const lda::TopicModel& t, const std::string& w) { return lda::topic_embedding(t, w); },
           py::arg("word"))
      .def("save", &lda::TopicModel::save, py::arg("path"))
      .def_static("load", &lda::TopicModel::load, py::arg("path"));
  m.def(
      "train_lda",
      [](const std::vector<Tokens>& docs, std::size_t topics, std::size_t iterations, std::uint64_t seed, double alpha,
         double beta) {
        lda::GibbsOptions o;
        o.num_topics = topics;
        o.iterations = iterations;
        o.seed = seed;
        o.alpha = alpha;
        o.beta = beta;
        py::gil_scoped_release release;
        return lda::gibbs_train(docs, o);
      },
      py::arg("docs"), py::arg("topics"), py::arg("iterations") = 500, py::arg("seed") = 1, py::arg("alpha") = -1.0,
      py::arg("beta") = 0.01);

  m.def("rouge_l", &metrics::rouge_l, py::arg("candidate"), py::arg("references"));
  m.def("bleu_1", &metrics::bleu_1, py::arg("candidate"), py::arg("references"));
  m.def("cider_d", &metrics::cider_d, py::arg("candidates"), py::arg("references"));
  m.def("diversity_count", &metrics::diversity_count, py::arg("candidates"));
  m.def(
      "score_report",
      [](const std::vector<std::string>& ids, const std::vector<std::vector<Tokens>>& candidates,
         const std::vector<metrics::References>& references, const std::vector<std::size_t>& n_list,
         const std::string& mode) {
        return metrics::report_json(metrics::score_report(ids, candidates, references, n_list, parse_mode(mode)));
      },
      py::arg("ids"), py::arg("candidates"), py::arg("references"), py::arg("n_list") = std::vector<std::size_t>{1, 3, 5},
      py::arg("mode") = "mean_of_best_n");

  m.def("run_command", &run_command, py::arg("command"), py::arg("settings"));
  m.def("config_keys", [] {
    std::map<std::string, std::string> out;
    for (const auto& k : cli::RunConfig::keys()) out[k.name] = k.default_value;
    return out;
  });
}
