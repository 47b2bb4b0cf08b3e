#include "wlhn/train.hpp"

#include "wlhn/errors.hpp"
#include "wlhn/hypgeo.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace wlhn::train {
namespace {

template <typename T>
T field(const nlohmann::json& j, const std::string& section, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(section + "." + key + ": " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, const std::string& section, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw std::invalid_argument(section + ": expected an object");
  for (const auto& [key, v] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw std::invalid_argument(section + "." + key + ": unknown key");
    }
  }
}

std::string diagnostics_text(double grad_norm) {
  const auto d = hypgeo::diagnostics();
  std::ostringstream ss;
  ss << "grad_norm=" << grad_norm << " boundary_clamps=" << d.boundary_clamps << " acosh_clamps=" << d.acosh_clamps
     << " artanh_clamps=" << d.artanh_clamps << " denominator_clamps=" << d.denominator_clamps;
  return ss.str();
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (dataset.kind != "tud" && dataset.kind != "corpus" && dataset.kind != "builtin" &&
      dataset.kind != "generate") {
    throw std::invalid_argument("dataset.kind: must be tud, corpus, builtin or generate");
  }
  if ((dataset.kind == "tud" || dataset.kind == "corpus") && dataset.path.empty()) throw std::invalid_argument("dataset.path: required");
  if (dataset.kind == "tud" && dataset.name.empty()) throw std::invalid_argument("dataset.name: required for tud");
  if (!(optim.lr > 0.0)) throw std::invalid_argument("optim.lr: must be positive");
  if (optim.epochs < 0) throw std::invalid_argument("optim.epochs: must be >= 0");
  if (optim.batch_size < 0) throw std::invalid_argument("optim.batch_size: must be >= 0");
  if (!(optim.clip_norm >= 0.0)) throw std::invalid_argument("optim.clip_norm: must be >= 0");
  if (optim.lr_schedule != "constant" && optim.lr_schedule != "cosine") {
    throw std::invalid_argument("optim.lr_schedule: must be constant or cosine");
  }
  if (split.unit != "graph" && split.unit != "node" && split.unit != "auto") {
    throw std::invalid_argument("split.unit: must be graph, node or auto");
  }
  if (split.unit == "node" && !model::is_node_task(model.task)) {
    throw std::invalid_argument("split.unit: node splits need a node task");
  }
  for (double r : split.ratios) {
    if (!(r >= 0.0)) throw std::invalid_argument("split.ratios: must be nonnegative");
  }
  if (baseline != "none" && baseline != "gin") throw std::invalid_argument("baseline: must be none or gin");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, "config", {"task", "dataset", "model", "optim", "split", "seeds", "baseline", "output_dir",
                               "standardize_targets"});
  RunConfig c;
  if (j.contains("task")) c.model.task = model::parse_task(field<std::string>(j["task"], "config", "task"));
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    reject_unknown(d, "dataset", {"kind", "path", "name", "gen"});
    if (d.contains("kind")) c.dataset.kind = field<std::string>(d["kind"], "dataset", "kind");
    if (d.contains("path")) c.dataset.path = field<std::string>(d["path"], "dataset", "path");
    if (d.contains("name")) c.dataset.name = field<std::string>(d["name"], "dataset", "name");
    if (d.contains("gen")) {
      const auto& g = d["gen"];
      reject_unknown(g, "dataset.gen", {"kind", "n", "m", "p", "graphs", "target", "seed"});
      auto& s = c.dataset.gen;
      if (g.contains("kind")) s.kind = field<std::string>(g["kind"], "dataset.gen", "kind");
      if (g.contains("n")) s.n = field<NodeId>(g["n"], "dataset.gen", "n");
      if (g.contains("m")) s.m = field<int>(g["m"], "dataset.gen", "m");
      if (g.contains("p")) s.p = field<double>(g["p"], "dataset.gen", "p");
      if (g.contains("graphs")) s.graphs = field<int>(g["graphs"], "dataset.gen", "graphs");
      if (g.contains("target")) s.target = data::parse_target(field<std::string>(g["target"], "dataset.gen", "target"));
      if (g.contains("seed")) s.seed = field<std::uint64_t>(g["seed"], "dataset.gen", "seed");
    }
  }
  if (j.contains("model")) {
    nlohmann::json m = j["model"];
    if (j.contains("task")) m["task"] = j["task"];
    c.model = model::model_config_from_json(m, c.model);
  }
  if (j.contains("optim")) {
    const auto& o = j["optim"];
    reject_unknown(o, "optim", {"lr", "epochs", "batch_size", "clip_norm", "lr_schedule"});
    if (o.contains("lr")) c.optim.lr = field<double>(o["lr"], "optim", "lr");
    if (o.contains("epochs")) c.optim.epochs = field<int>(o["epochs"], "optim", "epochs");
    if (o.contains("batch_size")) c.optim.batch_size = field<int>(o["batch_size"], "optim", "batch_size");
    if (o.contains("clip_norm")) c.optim.clip_norm = field<double>(o["clip_norm"], "optim", "clip_norm");
    if (o.contains("lr_schedule")) c.optim.lr_schedule = field<std::string>(o["lr_schedule"], "optim", "lr_schedule");
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    reject_unknown(s, "split", {"ratios", "unit", "seed"});
    if (s.contains("ratios")) {
      const auto r = field<std::vector<double>>(s["ratios"], "split", "ratios");
      if (r.size() != 3) throw std::invalid_argument("split.ratios: expected three numbers");
      c.split.ratios = {r[0], r[1], r[2]};
    }
    if (s.contains("unit")) c.split.unit = field<std::string>(s["unit"], "split", "unit");
    if (s.contains("seed")) c.split.seed = field<std::uint64_t>(s["seed"], "split", "seed");
  }
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    reject_unknown(s, "seeds", {"init", "shuffle"});
    if (s.contains("init")) c.init_seed = field<std::uint64_t>(s["init"], "seeds", "init");
    if (s.contains("shuffle")) c.shuffle_seed = field<std::uint64_t>(s["shuffle"], "seeds", "shuffle");
  }
  if (j.contains("baseline")) c.baseline = field<std::string>(j["baseline"], "config", "baseline");
  if (j.contains("output_dir")) c.output_dir = field<std::string>(j["output_dir"], "config", "output_dir");
  if (j.contains("standardize_targets")) {
    c.standardize_targets = field<bool>(j["standardize_targets"], "config", "standardize_targets");
  }
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json m = model::to_json(c.model);
  const std::string task = m["task"];
  m.erase("task");
  return {{"task", task},
          {"dataset",
           {{"kind", c.dataset.kind},
            {"path", c.dataset.path},
            {"name", c.dataset.name},
            {"gen",
             {{"kind", c.dataset.gen.kind},
              {"n", c.dataset.gen.n},
              {"m", c.dataset.gen.m},
              {"p", c.dataset.gen.p},
              {"graphs", c.dataset.gen.graphs},
              {"target", data::to_string(c.dataset.gen.target)},
              {"seed", c.dataset.gen.seed}}}}},
          {"model", m},
          {"optim",
           {{"lr", c.optim.lr}, {"epochs", c.optim.epochs}, {"batch_size", c.optim.batch_size}, {"clip_norm", c.optim.clip_norm},
            {"lr_schedule", c.optim.lr_schedule}}},
          {"split", {{"ratios", c.split.ratios}, {"unit", c.split.unit}, {"seed", c.split.seed}}},
          {"seeds", {{"init", c.init_seed}, {"shuffle", c.shuffle_seed}}},
          {"baseline", c.baseline},
          {"output_dir", c.output_dir},
          {"standardize_targets", c.standardize_targets}};
}

void apply_seed_override(RunConfig& c) {
  const char* env = std::getenv("WLHN_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw std::invalid_argument("WLHN_SEED: not an unsigned integer");
  c.split.seed = c.init_seed = c.shuffle_seed = s;
}

std::vector<std::string> builtin_names() { return {"cycle-with-tails"}; }

data::Corpus builtin_dataset(const std::string& name) {
  if (name == "cycle-with-tails") {
    // 5-cycle with a 3-node tail at node 0 and a 2-node tail at node 2;
    // uniform colors keep refining for four rounds.
    const std::vector<std::pair<NodeId, NodeId>> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0},
                                                       {0, 5}, {5, 6}, {6, 7}, {2, 8}, {8, 9}};
    data::Corpus c;
    c.graphs.push_back(Graph::from_edges(10, edges));
    c.graphs.back().graph_label = 0;
    c.meta = {{"kind", "builtin"}, {"params", {{"name", name}}}, {"seed", nullptr}};
    return c;
  }
  throw std::invalid_argument("unknown builtin dataset '" + name + "'");
}

data::Corpus load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "tud") return data::load_tud(spec.path, spec.name);
  if (spec.kind == "corpus") return data::load_corpus(spec.path);
  if (spec.kind == "builtin") return builtin_dataset(spec.name);
  if (spec.kind == "generate") return data::generate(spec.gen);
  throw std::invalid_argument("dataset.kind: must be tud, corpus, builtin or generate");
}

void fit_model_to_corpus(model::ModelConfig& m, const data::Corpus& c) {
  if (c.graphs.empty()) throw std::invalid_argument("dataset: no graphs");
  m.input_dim = static_cast<int>(c.feature_dim());
  switch (m.task) {
    case model::Task::kGraphClassification: {
      int k = c.num_classes;
      for (const auto& g : c.graphs) {
        if (!g.graph_label) throw std::invalid_argument("dataset: graph classification needs graph labels");
        k = std::max(k, *g.graph_label + 1);
      }
      m.num_outputs = std::max(k, 2);
      break;
    }
    case model::Task::kNodeRegression:
      for (const auto& g : c.graphs) {
        if (static_cast<NodeId>(g.node_targets.size()) != g.num_nodes()) {
          throw std::invalid_argument("dataset: node regression needs a target per node");
        }
      }
      m.num_outputs = 1;
      break;
    case model::Task::kNodeClassification: {
      int k = 0;
      for (const auto& g : c.graphs) {
        if (static_cast<NodeId>(g.node_labels.size()) != g.num_nodes()) {
          throw std::invalid_argument("dataset: node classification needs a label per node");
        }
        for (int l : g.node_labels) k = std::max(k, l + 1);
      }
      m.num_outputs = std::max(k, 2);
      break;
    }
  }
}

Trainer::Trainer(const RunConfig& cfg, const data::Corpus& corpus)
    : cfg_(cfg), corpus_(corpus), model_((fit_model_to_corpus(cfg_.model, corpus), cfg_.model), cfg.init_seed) {
  cfg_.validate();
  node_unit_ = cfg_.split.unit == "node" || (cfg_.split.unit == "auto" && model::is_node_task(cfg_.model.task));
  regression_ = cfg_.model.task == model::Task::kNodeRegression;
  node_offset_.push_back(0);
  for (const auto& g : corpus_.graphs) node_offset_.push_back(node_offset_.back() + g.num_nodes());
  if (node_unit_) {
    // Nodes of each graph are split separately, graph g with seed + g.
    for (std::size_t g = 0; g < corpus_.graphs.size(); ++g) {
      const auto part = data::split(static_cast<std::size_t>(corpus_.graphs[g].num_nodes()), cfg_.split.ratios,
                                    cfg_.split.seed + g);
      const auto off = static_cast<int>(node_offset_[g]);
      for (int v : part.train) split_.train.push_back(off + v);
      for (int v : part.val) split_.val.push_back(off + v);
      for (int v : part.test) split_.test.push_back(off + v);
    }
  } else {
    split_ = data::split(corpus_.graphs.size(), cfg_.split.ratios, cfg_.split.seed);
  }
  if (regression_ && cfg_.standardize_targets) {
    std::vector<double> train_targets;
    if (node_unit_) {
      for (int id : split_.train) {
        const auto g = static_cast<std::size_t>(std::upper_bound(node_offset_.begin(), node_offset_.end(), id) - node_offset_.begin() - 1);
        train_targets.push_back(corpus_.graphs[g].node_targets[static_cast<std::size_t>(id - node_offset_[g])]);
      }
    } else {
      for (int gi : split_.train) {
        const auto& t = corpus_.graphs[static_cast<std::size_t>(gi)].node_targets;
        train_targets.insert(train_targets.end(), t.begin(), t.end());
      }
    }
    scaler_ = data::Standardizer::fit(train_targets);
  }
}

Trainer::Prepared Trainer::prepare(const std::vector<int>& graphs, const std::vector<char>* node_mask) const {
  Prepared p;
  p.graphs = graphs;
  p.batch = data::batch_of(corpus_, graphs);
  if (!model::is_node_task(cfg_.model.task)) {
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      p.rows.push_back(static_cast<int>(i));
      p.labels.push_back(*corpus_.graphs[static_cast<std::size_t>(graphs[i])].graph_label);
    }
    return p;
  }
  std::vector<double> targets;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto gi = static_cast<std::size_t>(graphs[i]);
    const Graph& g = corpus_.graphs[gi];
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (node_mask != nullptr && !(*node_mask)[static_cast<std::size_t>(node_offset_[gi] + v)]) continue;
      p.rows.push_back(p.batch.graph_offsets[i] + v);
      if (regression_) {
        const double t = g.node_targets[static_cast<std::size_t>(v)];
        targets.push_back(cfg_.standardize_targets ? scaler_.apply(t) : t);
      } else {
        p.labels.push_back(g.node_labels[static_cast<std::size_t>(v)]);
      }
    }
  }
  p.targets = Eigen::Map<const grad::Matrix>(targets.data(), static_cast<Eigen::Index>(targets.size()), 1);
  return p;
}

std::vector<Trainer::Prepared> Trainer::prepare_all(const std::vector<int>& items, int batch_size) const {
  std::vector<Prepared> out;
  if (!node_unit_) {
    for (const auto& group : data::chunk(items, batch_size)) out.push_back(prepare(group, nullptr));
    return out;
  }
  std::vector<char> mask(static_cast<std::size_t>(node_offset_.back()), 0);
  for (int id : items) mask[static_cast<std::size_t>(id)] = 1;
  std::vector<int> graphs;
  for (std::size_t g = 0; g < corpus_.graphs.size(); ++g) {
    if (std::any_of(mask.begin() + node_offset_[g], mask.begin() + node_offset_[g + 1], [](char m) { return m != 0; })) {
      graphs.push_back(static_cast<int>(g));
    }
  }
  for (const auto& group : data::chunk(graphs, batch_size)) out.push_back(prepare(group, &mask));
  return out;
}

grad::Var Trainer::loss(const Prepared& p, grad::Var output) const {
  const grad::Var picked = model::is_node_task(cfg_.model.task) ? grad::gather_rows(output, p.rows) : output;
  if (regression_) return grad::mse(picked, p.targets);
  return grad::cross_entropy(picked, p.labels);
}

void Trainer::score(const Prepared& p, const grad::Matrix& out, double& total, std::size_t& count) const {
  if (regression_) {
    for (std::size_t k = 0; k < p.rows.size(); ++k) {
      const double e = out(p.rows[k], 0) - p.targets(static_cast<Eigen::Index>(k), 0);
      total += e * e;
    }
  } else {
    grad::Matrix picked(static_cast<Eigen::Index>(p.rows.size()), out.cols());
    for (std::size_t k = 0; k < p.rows.size(); ++k) picked.row(static_cast<Eigen::Index>(k)) = out.row(p.rows[k]);
    const auto pred = model::argmax_rows(picked);
    for (std::size_t k = 0; k < pred.size(); ++k) total += pred[k] == p.labels[k] ? 1.0 : 0.0;
  }
  count += p.rows.size();
}

grad::Matrix Trainer::eval_output(const Prepared& p) {
  grad::Tape tape;
  grad::Rng rng(0);
  return model_.forward(tape, p.batch, model::Mode::kEval, rng).output.value();
}

double Trainer::evaluate(const std::vector<int>& items) {
  if (items.empty()) return std::nan("");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& p : prepare_all(items, 0)) {
    if (p.rows.empty()) continue;
    score(p, eval_output(p), total, count);
  }
  return count == 0 ? std::nan("") : total / static_cast<double>(count);
}

std::pair<double, double> Trainer::evaluate_val_test() {
  if (node_unit_ && !split_.val.empty() && !split_.test.empty()) {
    if (eval_cache_.empty()) {
      eval_cache_ = prepare_all(split_.val, 0);
      auto test = prepare_all(split_.test, 0);
      eval_cache_.insert(eval_cache_.end(), test.begin(), test.end());
    }
    // Node splits usually cover the same graphs, so one forward pass serves both.
    if (eval_cache_.size() == 2 && eval_cache_[0].graphs == eval_cache_[1].graphs) {
      const grad::Matrix out = eval_output(eval_cache_[0]);
      double tv = 0.0, tt = 0.0;
      std::size_t cv = 0, ct = 0;
      score(eval_cache_[0], out, tv, cv);
      score(eval_cache_[1], out, tt, ct);
      return {cv == 0 ? std::nan("") : tv / static_cast<double>(cv),
              ct == 0 ? std::nan("") : tt / static_cast<double>(ct)};
    }
  }
  return {evaluate(split_.val), evaluate(split_.test)};
}

TrainResult Trainer::run(const std::function<void(const EpochMetrics&)>& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  TrainResult r;
  r.metric = regression_ ? "mse" : "accuracy";
  auto better = [&](double a, double b) { return regression_ ? a < b : a > b; };

  std::tie(r.untrained_val, r.untrained_test) = evaluate_val_test();
  r.best_epoch = 0;
  r.best_val = r.untrained_val;
  r.test_at_best = r.untrained_test;
  r.best_checkpoint = grad::checkpoint_to_json(model_.params());

  grad::Rng shuffle_rng(cfg_.shuffle_seed);
  grad::Rng dropout_rng(cfg_.init_seed ^ 0x9e3779b97f4a7c15ULL);
  grad::AdamConfig adam{cfg_.optim.lr};
  std::vector<Prepared> fixed;
  if (node_unit_) fixed = prepare_all(split_.train, cfg_.optim.batch_size);
  std::vector<int> order = split_.train;
  bool have_best = false;

  for (int epoch = 1; epoch <= cfg_.optim.epochs; ++epoch) {
    if (cfg_.optim.lr_schedule == "cosine") {
      constexpr double kPi = 3.14159265358979323846;
      adam.lr = 0.5 * cfg_.optim.lr * (1.0 + std::cos(kPi * (epoch - 1) / cfg_.optim.epochs));
    }
    std::vector<Prepared> batches;
    if (node_unit_) {
      std::vector<std::size_t> idx(fixed.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), shuffle_rng);
      for (std::size_t i : idx) batches.push_back(fixed[i]);
    } else {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      batches = prepare_all(order, cfg_.optim.batch_size);
    }
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& p : batches) {
      if (p.rows.empty()) continue;
      grad::Tape tape;
      const auto fwd = model_.forward(tape, p.batch, model::Mode::kTrain, dropout_rng);
      const grad::Var l = loss(p, fwd.output);
      const double lv = l.scalar();
      if (!std::isfinite(lv)) {
        throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + ": " +
                             diagnostics_text(model_.params().grad_norm()));
      }
      tape.backward(l);
      const double gn = model_.params().clip_grad_norm(cfg_.optim.clip_norm);
      if (!std::isfinite(gn)) {
        throw NonFiniteError("non-finite gradient at epoch " + std::to_string(epoch) + ": " + diagnostics_text(gn));
      }
      grad::adam_step(model_.params(), adam);
      loss_sum += lv * static_cast<double>(p.rows.size());
      loss_count += p.rows.size();
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_count == 0 ? 0.0 : loss_sum / static_cast<double>(loss_count);
    std::tie(m.val_metric, m.test_metric) = evaluate_val_test();
    r.history.push_back(m);
    if (on_epoch) on_epoch(m);
    if (!have_best || better(m.val_metric, r.best_val)) {
      have_best = true;
      r.best_epoch = epoch;
      r.best_val = m.val_metric;
      r.test_at_best = m.test_metric;
      r.best_checkpoint = grad::checkpoint_to_json(model_.params());
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace wlhn::train
