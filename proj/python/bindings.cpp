#include "wlhn/analysis.hpp"
#include "wlhn/cli.hpp"
#include "wlhn/datasets.hpp"
#include "wlhn/errors.hpp"
#include "wlhn/hypgeo.hpp"
#include "wlhn/model.hpp"
#include "wlhn/sarkar.hpp"
#include "wlhn/train.hpp"
#include "wlhn/wlcolor.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include <sstream>

namespace py = pybind11;
using namespace wlhn;

namespace {

using Edges = std::vector<std::pair<NodeId, NodeId>>;
using GraphSpec = std::pair<NodeId, Edges>;

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<Graph> make_graphs(const std::vector<GraphSpec>& specs) {
  std::vector<Graph> out;
  for (const auto& [n, e] : specs) out.push_back(Graph::from_edges(n, e));
  return out;
}

Batch batch_of(const std::vector<Graph>& graphs) {
  std::vector<const Graph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  return make_batch(ptrs);
}

hypgeo::BallPoint ball(const Eigen::VectorXd& x) { return hypgeo::BallPoint(x); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Poincare-ball geometry, WL hierarchies and the WL hyperbolic network";

  py::register_exception<PrecisionError>(m, "PrecisionError", PyExc_ArithmeticError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);

  m.def("distance", [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return hypgeo::distance(ball(x), ball(y)); },
        py::arg("x"), py::arg("y"));
  m.def("distance_from_origin", [](const Eigen::VectorXd& x) { return hypgeo::distance_from_origin(ball(x)); });
  m.def("mobius_add", [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return Eigen::VectorXd(hypgeo::mobius_add(ball(x), ball(y)).coords());
  });
  m.def("exp_map", [](const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
    return Eigen::VectorXd(hypgeo::exp_map(ball(x), hypgeo::TangentVector(v)).coords());
  });
  m.def("log_map", [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return hypgeo::log_map(ball(x), ball(y)).coords;
  });
  m.def("reflect_to_origin", [](const Eigen::VectorXd& a, const Eigen::VectorXd& x) {
    return hypgeo::Inversion(a).apply(x);
  }, py::arg("a"), py::arg("x"), "Inversion swapping a and the origin, applied to x.");

  m.def("wl_colors", [](NodeId n, const Edges& edges, int iterations, const std::string& initial) {
    const Graph g = Graph::from_edges(n, edges);
    std::vector<std::vector<int>> out;
    for (const auto& c : wl::color_sequence(g, iterations, wl::parse_initial_coloring(initial))) out.push_back(c.color_of);
    return out;
  }, py::arg("num_nodes"), py::arg("edges"), py::arg("iterations"), py::arg("initial") = "features");

  m.def("embed", [](const std::vector<GraphSpec>& graphs, int layers, int dim, double tau, std::uint64_t seed,
                    const std::string& arm) {
    const auto gs = make_graphs(graphs);
    const Batch b = batch_of(gs);
    model::ModelConfig cfg;
    cfg.layers = layers;
    cfg.dim = dim;
    cfg.tau = tau;
    cfg.arm = model::parse_arm(arm);
    cfg.initial_coloring = wl::InitialColoring::kMonochromatic;
    model::Model model(cfg, seed);
    const auto snap = model::snapshot(model, b, model::Mode::kBatchStats);
    py::dict out;
    out["hierarchy"] = to_py(wl::to_json(snap.hierarchy()));
    if (cfg.arm == model::Arm::kWlhn) out["hyperbolic"] = RowMatrix(snap.hyperbolic_by_hierarchy_node());
    out["euclidean"] = RowMatrix(snap.euclidean_by_hierarchy_node());
    return out;
  }, py::arg("graphs"), py::arg("layers") = 2, py::arg("dim") = 64, py::arg("tau") = 1.0, py::arg("seed") = 0,
     py::arg("arm") = "wlhn",
     "Untrained embedding of the WL hierarchy of (num_nodes, edges) graphs, one row per hierarchy node.");

  m.def("wl_correlation", [](const py::object& hierarchy, const RowMatrix& points, const std::string& metric) {
    const auto h = wl::hierarchy_from_json(from_py(hierarchy));
    return analysis::correlation_study(h, points, analysis::parse_metric(metric)).correlation;
  }, py::arg("hierarchy"), py::arg("points"), py::arg("metric") = "hyperbolic");

  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return analysis::pearson(x, y); });

  m.def("sarkar_embed", [](const std::vector<int>& parent, double tau) {
    const auto e = sarkar::embed_tree(sarkar::Tree::from_parents(parent), tau);
    py::dict out;
    out["points"] = e.points;
    out["distortion"] = to_py(sarkar::to_json(sarkar::distortion_report(e)));
    return out;
  }, py::arg("parent"), py::arg("tau") = 1.0, "parent[i] is the parent of node i, -1 for the root.");

  m.def("generate", [](const std::string& kind, NodeId n, int m_edges, double p, int graphs, const std::string& target,
                       std::uint64_t seed) {
    data::GenSpec s;
    s.kind = kind;
    s.n = n;
    s.m = m_edges;
    s.p = p;
    s.graphs = graphs;
    s.target = data::parse_target(target);
    s.seed = seed;
    return to_py(data::corpus_to_json(data::generate(s)));
  }, py::arg("kind") = "ba", py::arg("n") = 1000, py::arg("m") = 5, py::arg("p") = 0.01, py::arg("graphs") = 10,
     py::arg("target") = "density", py::arg("seed") = 0);

  m.def("train", [](const py::object& config) {
    train::RunConfig cfg = train::run_config_from_json(from_py(config));
    train::apply_seed_override(cfg);
    const data::Corpus corpus = train::load_dataset(cfg.dataset);
    train::fit_model_to_corpus(cfg.model, corpus);
    train::TrainResult r;
    {
      py::gil_scoped_release release;
      train::Trainer t(cfg, corpus);
      r = t.run();
    }
    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : r.history) {
      history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_metric", e.val_metric},
                         {"test_metric", e.test_metric}});
    }
    return to_py({{"metric", r.metric}, {"untrained_val", r.untrained_val}, {"untrained_test", r.untrained_test},
                  {"best_epoch", r.best_epoch}, {"best_val", r.best_val}, {"test_at_best", r.test_at_best},
                  {"history", history}});
  }, py::arg("config"), "Runs one training job from a run-config dict and returns its metrics.");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
