#include "wlhn/model.hpp"

#include "wlhn/hypgeo.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace wlhn::model {

using grad::Matrix;
using grad::Tape;
using grad::Var;

Task parse_task(std::string_view s) {
  if (s == "graph-classification") return Task::kGraphClassification;
  if (s == "node-regression") return Task::kNodeRegression;
  if (s == "node-classification") return Task::kNodeClassification;
  throw std::invalid_argument("unknown task '" + std::string(s) + "'");
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kGraphClassification: return "graph-classification";
    case Task::kNodeRegression: return "node-regression";
    case Task::kNodeClassification: return "node-classification";
  }
  return "?";
}

Arm parse_arm(std::string_view s) {
  if (s == "wlhn") return Arm::kWlhn;
  if (s == "gin") return Arm::kGin;
  throw std::invalid_argument("unknown model arm '" + std::string(s) + "'");
}

std::string_view to_string(Arm a) { return a == Arm::kWlhn ? "wlhn" : "gin"; }

bool is_node_task(Task t) { return t != Task::kGraphClassification; }

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("model." + field + ": " + why);
  };
  if (input_dim < 1) fail("input_dim", "must be >= 1");
  if (dim < 2) fail("dim", "must be >= 2");
  if (layers < 1) fail("layers", "must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau", "must be a positive number");
  if (mlp_depth < 1) fail("mlp_depth", "must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must lie in [0, 1)");
  for (int w : head) {
    if (w < 1) fail("head", "widths must be >= 1");
  }
  if (num_outputs < 1) fail("num_outputs", "must be >= 1");
  if (task != Task::kNodeRegression && num_outputs < 2) fail("num_outputs", "classification needs >= 2 classes");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"dim", c.dim},
          {"layers", c.layers},
          {"tau", c.tau},
          {"epsilon_trainable", c.epsilon_trainable},
          {"mlp_depth", c.mlp_depth},
          {"dropout", c.dropout},
          {"head", c.head},
          {"task", std::string(to_string(c.task))},
          {"num_outputs", c.num_outputs},
          {"initial_coloring", std::string(wl::to_string(c.initial_coloring))},
          {"arm", std::string(to_string(c.arm))}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, const ModelConfig& defaults) {
  if (!j.is_object()) throw std::invalid_argument("model: expected an object");
  ModelConfig c = defaults;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "input_dim") c.input_dim = v.get<int>();
      else if (key == "dim") c.dim = v.get<int>();
      else if (key == "layers") c.layers = v.get<int>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "epsilon_trainable") c.epsilon_trainable = v.get<bool>();
      else if (key == "mlp_depth") c.mlp_depth = v.get<int>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "head") c.head = v.get<std::vector<int>>();
      else if (key == "task") c.task = parse_task(v.get<std::string>());
      else if (key == "num_outputs") c.num_outputs = v.get<int>();
      else if (key == "initial_coloring") c.initial_coloring = wl::parse_initial_coloring(v.get<std::string>());
      else if (key == "arm") c.arm = parse_arm(v.get<std::string>());
      else throw std::invalid_argument("unknown key");
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("model." + key + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("model." + key + ": " + e.what());
    }
  }
  return c;
}

Eigen::RowVectorXd parent_anchor(Eigen::Index dim) {
  return Eigen::RowVectorXd::Constant(dim, -1.0 / std::sqrt(static_cast<double>(dim)));
}

Var diff_hyp_con(Var child_rep, Var prev, Var prevprev, std::span<const int> parent,
                 std::span<const int> grandparent, double tau, PlacementTrace* trace) {
  const Eigen::Index k = child_rep.rows();
  if (static_cast<Eigen::Index>(parent.size()) != k || static_cast<Eigen::Index>(grandparent.size()) != k) {
    throw std::invalid_argument("diff_hyp_con: one parent and grandparent per child class");
  }
  const Var a = grad::gather_rows(prev, parent);
  const Var b = grad::gather_rows(prevprev, grandparent);
  const Var u = grad::inversion_rows(a, b);
  const Var dir = grad::householder_rows(u, grad::row_normalize(child_rep), parent_anchor(child_rep.cols()));
  const Var z = grad::inversion_rows(a, grad::scale(dir, std::tanh(tau / 2.0)));
  if (trace != nullptr) {
    trace->directions = dir.value();
    trace->reflected_parent = u.value();
  }
  return grad::clamp_rows_to_ball(z, 1.0 - hypgeo::kBoundaryEps);
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  grad::Rng rng(seed);
  const int d = cfg_.dim;
  add_linear("input", cfg_.input_dim, d, rng);
  for (int t = 1; t <= cfg_.layers; ++t) {
    const std::string p = "gin" + std::to_string(t);
    params_.add(p + ".eps", Matrix::Zero(1, 1), cfg_.epsilon_trainable);
    for (int k = 0; k < cfg_.mlp_depth; ++k) {
      const std::string m = p + ".mlp" + std::to_string(k);
      add_linear(m, d, d, rng);
      params_.add(m + ".bn.gamma", Matrix::Ones(1, d));
      params_.add(m + ".bn.beta", Matrix::Zero(1, d));
      params_.buffer(m + ".bn.mean", Matrix::Zero(1, d));
      params_.buffer(m + ".bn.var", Matrix::Ones(1, d));
    }
  }
  int in = d;
  for (std::size_t i = 0; i < cfg_.head.size(); ++i) {
    add_linear("head" + std::to_string(i), in, cfg_.head[i], rng);
    in = cfg_.head[i];
  }
  add_linear("out", in, cfg_.num_outputs, rng);
}

void Model::add_linear(const std::string& name, int in, int out, grad::Rng& rng) {
  params_.add(name + ".W", grad::glorot_uniform(in, out, rng));
  params_.add(name + ".b", Matrix::Zero(1, out));
}

Var Model::apply_linear(Tape& tape, const std::string& name, Var x) {
  return grad::linear(x, tape.param(params_.at(name + ".W")), tape.param(params_.at(name + ".b")));
}

Var Model::gin_layer(Tape& tape, int t, const Graph& graph, Var h_prev, Mode mode) {
  const std::string p = "gin" + std::to_string(t);
  const Var eps = tape.param(params_.at(p + ".eps"));
  Var h = grad::add(grad::add(h_prev, grad::scale_by(h_prev, eps)), grad::scatter_sum(h_prev, graph));
  for (int k = 0; k < cfg_.mlp_depth; ++k) {
    const std::string m = p + ".mlp" + std::to_string(k);
    h = apply_linear(tape, m, h);
    Matrix& rmean = params_.buffer(m + ".bn.mean");
    Matrix& rvar = params_.buffer(m + ".bn.var");
    const Var gamma = tape.param(params_.at(m + ".bn.gamma"));
    const Var beta = tape.param(params_.at(m + ".bn.beta"));
    if (mode == Mode::kBatchStats) {
      Matrix mean_copy = rmean, var_copy = rvar;
      h = grad::batch_norm(h, gamma, beta, {&mean_copy, &var_copy}, true);
    } else {
      h = grad::batch_norm(h, gamma, beta, {&rmean, &rvar}, mode == Mode::kTrain);
    }
    h = grad::relu(h);
  }
  return h;
}

Var Model::head(Tape& tape, Var x, Mode mode, grad::Rng& rng) {
  for (std::size_t i = 0; i < cfg_.head.size(); ++i) {
    x = grad::relu(apply_linear(tape, "head" + std::to_string(i), x));
    x = grad::dropout(x, cfg_.dropout, rng, mode == Mode::kTrain);
  }
  return apply_linear(tape, "out", x);
}

ForwardResult Model::forward(Tape& tape, const Batch& batch, Mode mode, grad::Rng& rng) {
  const Graph& g = batch.graph;
  if (g.feature_dim() != cfg_.input_dim) {
    throw std::invalid_argument("forward: feature width " + std::to_string(g.feature_dim()) +
                                " but model.input_dim is " + std::to_string(cfg_.input_dim));
  }
  const bool hyperbolic = cfg_.arm == Arm::kWlhn;
  const double tau = cfg_.tau;
  ForwardResult out;
  out.root = tape.constant(Matrix::Zero(1, cfg_.dim));

  Var h = grad::relu(apply_linear(tape, "input", tape.constant(g.features())));
  wl::Coloring coloring = wl::initial_coloring(g, cfg_.initial_coloring);
  for (int t = 0; t <= cfg_.layers; ++t) {
    if (t > 0) {
      h = gin_layer(tape, t, g, h, mode);
      coloring = wl::refine(g, coloring);
      coloring.iteration = t;
    }
    LayerState s;
    s.t = t;
    s.reps = coloring.representatives();
    const std::vector<int> reps(s.reps.begin(), s.reps.end());
    s.euclidean_classes = grad::gather_rows(h, reps);
    h = grad::gather_rows(s.euclidean_classes, coloring.color_of);
    s.euclidean_nodes = h;
    s.parent.resize(reps.size(), 0);
    std::vector<int> grandparent(reps.size(), 0);
    if (t > 0) {
      const auto& prev = out.layers.back().coloring;
      for (std::size_t k = 0; k < reps.size(); ++k) s.parent[k] = prev.color_of[static_cast<std::size_t>(reps[k])];
      if (t > 1) {
        const auto& pp = out.layers[static_cast<std::size_t>(t) - 2].coloring;
        for (std::size_t k = 0; k < reps.size(); ++k) grandparent[k] = pp.color_of[static_cast<std::size_t>(reps[k])];
      }
    }
    if (hyperbolic) {
      const Var prev = t == 0 ? out.root : out.layers.back().hyperbolic_classes;
      const Var prevprev = t <= 1 ? out.root : out.layers[static_cast<std::size_t>(t) - 2].hyperbolic_classes;
      s.hyperbolic_classes = diff_hyp_con(s.euclidean_classes, prev, prevprev, s.parent, grandparent, tau, &s.trace);
    }
    s.coloring = coloring;
    out.layers.push_back(std::move(s));
  }

  const LayerState& last = out.layers.back();
  if (hyperbolic) {
    out.node_features = grad::gather_rows(grad::log0_rows(last.hyperbolic_classes), last.coloring.color_of);
  } else {
    out.node_features = last.euclidean_nodes;
  }

  if (is_node_task(cfg_.task)) {
    out.readout = out.node_features;
  } else if (hyperbolic) {
    out.readout = grad::segment_sum(out.node_features, batch.graph_of_node, batch.num_graphs());
  } else {
    Matrix weight(g.num_nodes(), cfg_.dim);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      const int gi = batch.graph_of_node[static_cast<std::size_t>(v)];
      weight.row(v).setConstant(1.0 / (batch.graph_offsets[static_cast<std::size_t>(gi) + 1] -
                                       batch.graph_offsets[static_cast<std::size_t>(gi)]));
    }
    out.readout = grad::segment_sum(grad::hadamard(out.node_features, tape.constant(std::move(weight))),
                                    batch.graph_of_node, batch.num_graphs());
  }
  out.output = head(tape, out.readout, mode, rng);
  return out;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()), 0);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

wl::ColorHierarchy EmbeddingSnapshot::hierarchy() const { return wl::ColorHierarchy::build(colorings); }

namespace {

Matrix stack_with_root(const std::vector<Matrix>& levels, int dim) {
  Eigen::Index rows = 1;
  for (const auto& m : levels) rows += m.rows();
  Matrix out = Matrix::Zero(rows, dim);
  Eigen::Index r = 1;
  for (const auto& m : levels) {
    out.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  return out;
}

}  // namespace

Matrix EmbeddingSnapshot::hyperbolic_by_hierarchy_node() const {
  return stack_with_root(hyperbolic_classes, dim);
}

Matrix EmbeddingSnapshot::euclidean_by_hierarchy_node() const {
  return stack_with_root(euclidean_classes, dim);
}

EmbeddingSnapshot snapshot(Model& model, const Batch& batch, Mode mode) {
  Tape tape;
  grad::Rng rng(0);
  const ForwardResult r = model.forward(tape, batch, mode, rng);
  EmbeddingSnapshot s;
  s.dim = model.config().dim;
  for (const auto& l : r.layers) {
    s.colorings.push_back(l.coloring);
    if (l.hyperbolic_classes.valid()) s.hyperbolic_classes.push_back(l.hyperbolic_classes.value());
    s.euclidean_classes.push_back(l.euclidean_classes.value());
    s.traces.push_back(l.trace);
    s.parents.push_back(l.parent);
    s.reps.push_back(l.reps);
  }
  return s;
}

}  // namespace wlhn::model
