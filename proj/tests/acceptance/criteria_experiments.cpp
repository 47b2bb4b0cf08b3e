#include "criteria.hpp"

#include "wlhn/analysis.hpp"
#include "wlhn/datasets.hpp"
#include "wlhn/model.hpp"
#include "wlhn/sarkar.hpp"
#include "wlhn/train.hpp"

#include <algorithm>
#include <sstream>

namespace wlhn::acceptance {
namespace {

double study(const model::EmbeddingSnapshot& snap, bool hyperbolic) {
  const auto h = snap.hierarchy();
  const auto s = hyperbolic
                     ? analysis::correlation_study(h, snap.hyperbolic_by_hierarchy_node(), analysis::Metric::kHyperbolic)
                     : analysis::correlation_study(h, snap.euclidean_by_hierarchy_node(), analysis::Metric::kEuclidean);
  return s.correlation.value_or(0.0);
}

struct RegressionSetting {
  data::GenSpec gen;
  int layers = 3;
  double lr = 1e-3;
  std::string schedule = "constant";
};

train::TrainResult fit(const RegressionSetting& s, const data::Corpus& corpus, model::Arm arm) {
  train::RunConfig cfg;
  cfg.dataset.kind = "generate";
  cfg.dataset.gen = s.gen;
  cfg.model.task = model::Task::kNodeRegression;
  cfg.model.arm = arm;
  cfg.model.dim = 64;
  cfg.model.layers = s.layers;
  cfg.optim.lr = s.lr;
  cfg.optim.lr_schedule = s.schedule;
  cfg.optim.epochs = 300;
  cfg.optim.batch_size = 1;
  train::fit_model_to_corpus(cfg.model, corpus);
  train::Trainer t(cfg, corpus);
  return t.run();
}

}  // namespace

Outcome cycle_with_tails_correlation() {
  const data::Corpus c = train::builtin_dataset("cycle-with-tails");
  std::vector<const Graph*> gs{&c.graphs[0]};
  const Batch b = make_batch(gs);
  double hyp = 0, euc = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    model::ModelConfig cfg;
    cfg.dim = 32;
    cfg.layers = 4;
    cfg.tau = 1.0;
    cfg.initial_coloring = wl::InitialColoring::kMonochromatic;
    model::Model m(cfg, seed);
    const auto snap = model::snapshot(m, b, model::Mode::kBatchStats);
    hyp += study(snap, true) / 10.0;
    euc += study(snap, false) / 10.0;
  }
  std::ostringstream s;
  s << "mean hyperbolic " << fmt(hyp) << " (>=0.9), mean euclidean " << fmt(euc) << " (<=" << fmt(hyp - 0.2) << ")";
  return {hyp >= 0.9 && euc <= hyp - 0.2, s.str()};
}

Outcome hierarchy_study() {
  const auto dir = find_tud("IMDB-BINARY");
  if (!dir) return {false, "dataset unavailable: IMDB-BINARY not found under $WLHN_DATA_DIR or tests/data"};
  const data::Corpus raw = data::load_tud(*dir, "IMDB-BINARY");
  std::vector<Graph> graphs;
  for (const auto& g : raw.graphs) graphs.push_back(Graph::from_edges(g.num_nodes(), g.edge_list()));
  std::vector<const Graph*> gs;
  for (const auto& g : graphs) gs.push_back(&g);
  const Batch b = make_batch(gs);

  model::ModelConfig cfg;
  cfg.dim = 128;
  cfg.layers = 2;
  cfg.initial_coloring = wl::InitialColoring::kMonochromatic;
  model::Model m(cfg, 0);
  const auto snap = model::snapshot(m, b, model::Mode::kBatchStats);
  const auto h = snap.hierarchy();
  // Siblings crowd together unless tau grows with the fan-out, so take the
  // longest edge that keeps the deepest leaf at distance 15 from the origin.
  const auto tree_in = sarkar::tree_from_hierarchy(h);
  const int height = *std::max_element(tree_in.depth.begin(), tree_in.depth.end());
  const double tau = 15.0 / std::max(height, 1);
  const auto emb = sarkar::embed_tree(tree_in, tau);
  const double tree = sarkar::distortion_report(emb).correlation.value_or(0.0);
  const double hyp = study(snap, true);
  const double euc = study(snap, false);
  std::ostringstream s;
  s << h.size() << " hierarchy nodes; sarkar (tau " << fmt(tau) << ") " << fmt(tree) << " (>=0.8), wlhn " << fmt(hyp) << " (in [0.3,0.85]), gin "
    << fmt(euc) << " (<wlhn)";
  return {tree >= 0.8 && hyp >= 0.3 && hyp <= 0.85 && euc < hyp, s.str()};
}

Outcome regression_benchmarks() {
  RegressionSetting ba;
  ba.gen.kind = "ba";
  ba.gen.m = 5;
  ba.gen.target = data::Target::kDensity;
  ba.layers = 4;
  ba.lr = 3e-3;
  RegressionSetting er;
  er.gen.kind = "er";
  er.gen.p = 0.008;
  er.gen.target = data::Target::kEffectiveSize;
  er.layers = 2;
  er.lr = 3e-3;
  er.schedule = "cosine";

  const data::Corpus ba_corpus = data::generate(ba.gen);
  const auto ba_wlhn = fit(ba, ba_corpus, model::Arm::kWlhn);
  const auto ba_gin = fit(ba, ba_corpus, model::Arm::kGin);
  const auto er_wlhn = fit(er, data::generate(er.gen), model::Arm::kWlhn);

  const bool ba_pass = ba_wlhn.test_at_best <= 0.012 && ba_wlhn.test_at_best <= ba_gin.test_at_best;
  const bool er_pass = er_wlhn.test_at_best <= 0.006;
  std::ostringstream s;
  s << "BA m=5 density: wlhn " << fmt(ba_wlhn.test_at_best) << " (<=0.012), gin " << fmt(ba_gin.test_at_best)
    << (ba_pass ? "" : " [not met]") << "; ER p=0.008 effective size: wlhn " << fmt(er_wlhn.test_at_best)
    << " (<=0.006)" << (er_pass ? "" : " [not met]");
  return {ba_pass && er_pass, s.str()};
}

Outcome mutag_sanity() {
  const auto dir = find_tud("MUTAG");
  if (!dir) return {false, "dataset unavailable: MUTAG not found under $WLHN_DATA_DIR or tests/data"};
  const data::Corpus c = data::load_tud(*dir, "MUTAG");
  train::RunConfig cfg;
  cfg.dataset.kind = "tud";
  cfg.dataset.path = *dir;
  cfg.dataset.name = "MUTAG";
  cfg.model.task = model::Task::kGraphClassification;
  cfg.model.dim = 64;
  cfg.model.layers = 4;
  cfg.optim.epochs = 300;
  cfg.split.ratios = {0.8, 0.1, 0.1};
  train::fit_model_to_corpus(cfg.model, c);
  train::Trainer t(cfg, c);
  const auto r = t.run();
  std::ostringstream s;
  s << c.graphs.size() << " graphs, test accuracy at best validation epoch " << r.best_epoch << ": "
    << fmt(r.test_at_best) << " (>=0.75)";
  return {r.test_at_best >= 0.75, s.str()};
}

}  // namespace wlhn::acceptance
