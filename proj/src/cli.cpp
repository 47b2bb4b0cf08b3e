#include "wlhn/cli.hpp"

#include "wlhn/analysis.hpp"
#include "wlhn/datasets.hpp"
#include "wlhn/errors.hpp"
#include "wlhn/hypgeo.hpp"
#include "wlhn/model.hpp"
#include "wlhn/platform.hpp"
#include "wlhn/sarkar.hpp"
#include "wlhn/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace wlhn::cli {
namespace {

namespace fs = std::filesystem;

// Configuration problems (exit 1) as opposed to runtime failures (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) { open_out(path) << j.dump(2) << '\n'; }

train::RunConfig load_run_config(const std::string& path) {
  train::RunConfig cfg;
  try {
    cfg = train::run_config_from_json(read_json(path));
    train::apply_seed_override(cfg);
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

data::Corpus load_corpus_for(const train::RunConfig& cfg) {
  try {
    return train::load_dataset(cfg.dataset);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---- gen ----

struct GenArgs {
  data::GenSpec spec;
  std::string target = "density";
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  data::GenSpec spec = a.spec;
  data::Corpus c;
  try {
    spec.target = data::parse_target(a.target);
    c = data::generate(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path path(a.out);
  data::save_corpus(c, path.string());

  nlohmann::json summary = c.meta;
  nlohmann::json graphs = nlohmann::json::array();
  for (const auto& g : c.graphs) {
    const auto st = data::Standardizer::fit(g.node_targets);
    graphs.push_back({{"num_nodes", g.num_nodes()},
                      {"num_edges", g.num_edges()},
                      {"target_mean", st.mean},
                      {"target_stddev", st.stddev}});
  }
  summary["graphs"] = graphs;
  summary["target"] = data::to_string(spec.target);
  summary["isolated_nodes"] = c.isolated_nodes;
  fs::path meta_path = path;
  meta_path.replace_extension(".meta.json");
  write_json(meta_path, summary);
  out << "wrote " << c.graphs.size() << " graphs to " << path.string() << '\n';
  return kOk;
}

// ---- train ----

nlohmann::json result_json(const train::TrainResult& r) {
  return {{"metric", r.metric},
          {"untrained_val", r.untrained_val},
          {"untrained_test", r.untrained_test},
          {"best_epoch", r.best_epoch},
          {"best_val", r.best_val},
          {"test_at_best", r.test_at_best},
          {"epochs_run", r.history.size()},
          {"seconds", r.seconds}};
}

train::TrainResult train_arm(const train::RunConfig& cfg, const data::Corpus& corpus, const fs::path& dir,
                             const std::string& suffix, std::ostream& out) {
  std::ofstream metrics = open_out(dir / ("metrics" + suffix + ".jsonl"));
  train::Trainer trainer(cfg, corpus);
  const auto r = trainer.run([&](const train::EpochMetrics& m) {
    metrics << nlohmann::json{{"epoch", m.epoch},
                              {"train_loss", m.train_loss},
                              {"val_metric", m.val_metric},
                              {"test_metric", m.test_metric}}
                   .dump()
            << '\n';
    metrics.flush();
  });
  write_json(dir / ("checkpoint" + suffix + ".json"), r.best_checkpoint);
  out << model::to_string(cfg.model.arm) << ": best epoch " << r.best_epoch << ", val " << r.metric << ' '
      << r.best_val << ", test " << r.metric << ' ' << r.test_at_best << '\n';
  return r;
}

int cmd_train(const std::string& config_path, const std::string& baseline, const std::string& output_dir,
              std::ostream& out) {
  train::RunConfig cfg = load_run_config(config_path);
  if (!baseline.empty()) cfg.baseline = baseline;
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const data::Corpus corpus = load_corpus_for(cfg);
  train::fit_model_to_corpus(cfg.model, corpus);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  nlohmann::json summary{{"config", train::to_json(cfg)}};
  hypgeo::reset_diagnostics();
  summary["wlhn"] = result_json(train_arm(cfg, corpus, dir, "", out));
  if (cfg.baseline == "gin") {
    train::RunConfig gin = cfg;
    gin.model.arm = model::Arm::kGin;
    summary["gin"] = result_json(train_arm(gin, corpus, dir, "_gin", out));
  }
  const auto d = hypgeo::diagnostics();
  summary["clamps"] = {{"boundary", d.boundary_clamps},
                       {"acosh", d.acosh_clamps},
                       {"artanh", d.artanh_clamps},
                       {"denominator", d.denominator_clamps}};
  write_json(dir / "summary.json", summary);
  return kOk;
}

// ---- embed ----

struct EmbedArgs {
  std::string config;
  std::string checkpoint;
  std::string layer = "all";
  std::string space;  // hyperbolic or euclidean; default follows the arm
  std::string out;
};

int cmd_embed(const EmbedArgs& a, std::ostream& out) {
  train::RunConfig cfg = load_run_config(a.config);
  const data::Corpus corpus = load_corpus_for(cfg);
  train::fit_model_to_corpus(cfg.model, corpus);

  std::string space = a.space;
  if (space.empty()) space = cfg.model.arm == model::Arm::kGin ? "euclidean" : "hyperbolic";
  if (space != "hyperbolic" && space != "euclidean") throw UsageError("--space: must be hyperbolic or euclidean");
  if (space == "hyperbolic" && cfg.model.arm == model::Arm::kGin) {
    throw UsageError("--space hyperbolic: the gin arm has no hyperbolic embedding");
  }
  std::optional<int> layer;
  if (a.layer == "final") {
    layer = cfg.model.layers;
  } else if (a.layer != "all") {
    std::size_t used = 0;
    int t = -1;
    try {
      t = std::stoi(a.layer, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != a.layer.size() || t < 0 || t > cfg.model.layers) {
      throw UsageError("--layer: expected all, final or 0.." + std::to_string(cfg.model.layers));
    }
    layer = t;
  }

  model::Model m(cfg.model, cfg.init_seed);
  model::Mode mode = model::Mode::kBatchStats;
  if (!a.checkpoint.empty()) {
    try {
      grad::load_checkpoint(m.params(), read_json(a.checkpoint));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    mode = model::Mode::kEval;
  }
  const std::size_t take = cfg.optim.batch_size == 0
                               ? corpus.graphs.size()
                               : std::min(corpus.graphs.size(), static_cast<std::size_t>(cfg.optim.batch_size));
  std::vector<int> graphs(take);
  std::iota(graphs.begin(), graphs.end(), 0);
  const Batch batch = data::batch_of(corpus, graphs);
  const auto snap = model::snapshot(m, batch, mode);
  const auto h = snap.hierarchy();
  const RowMatrix points = space == "hyperbolic" ? RowMatrix(snap.hyperbolic_by_hierarchy_node())
                                                 : RowMatrix(snap.euclidean_by_hierarchy_node());

  const fs::path dir(a.out);
  std::ofstream csv = open_out(dir / "embeddings.csv");
  csv.precision(17);
  csv << "node_id,graph_id,layer";
  for (Eigen::Index k = 0; k < points.cols(); ++k) csv << ",x" << k;
  csv << '\n';
  std::size_t rows = 0;
  for (const auto& node : h.nodes()) {
    if (layer && node.depth != *layer) continue;
    const int graph = node.members.empty() || node.depth < 0 ? -1 : batch.graph_of_node[static_cast<std::size_t>(node.members.front())];
    csv << node.id << ',' << graph << ',' << node.depth;
    for (Eigen::Index k = 0; k < points.cols(); ++k) csv << ',' << points(node.id, k);
    csv << '\n';
    ++rows;
  }
  write_json(dir / "hierarchy.json", wl::to_json(h));
  out << "wrote " << rows << " " << space << " rows for " << take << " graphs to " << dir.string() << '\n';
  return kOk;
}

// ---- analyze ----

struct EmbeddingTable {
  std::vector<int> ids;
  RowMatrix points;
};

EmbeddingTable read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw UsageError(path + ": empty file");
  const auto columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 4 || line.rfind("node_id,graph_id,layer,", 0) != 0) {
    throw UsageError(path + ": expected header node_id,graph_id,layer,<coordinates>");
  }
  const int dim = columns - 3;
  std::vector<int> ids;
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != columns) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields");
    }
    try {
      ids.push_back(std::stoi(cells[0]));
      for (int k = 3; k < columns; ++k) values.push_back(std::stod(cells[static_cast<std::size_t>(k)]));
    } catch (const std::exception&) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  EmbeddingTable t;
  t.ids = std::move(ids);
  t.points = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(t.ids.size()), dim);
  return t;
}

int cmd_analyze(const std::string& emb_path, const std::string& hier_path, const std::string& metric_name,
                std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
  analysis::Metric metric;
  wl::ColorHierarchy h;
  try {
    metric = analysis::parse_metric(metric_name);
    h = wl::hierarchy_from_json(read_json(hier_path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const EmbeddingTable t = read_embeddings(emb_path);
  analysis::StudyOptions opts;
  opts.seed = seed;
  analysis::DistanceStudy s;
  try {
    s = analysis::correlation_study(h, t.ids, t.points, metric, opts);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path dir(out_dir);
  const fs::path scatter = dir / "scatter.csv";
  const fs::path matrix = dir / "distances.csv";
  {
    std::ofstream f = open_out(scatter);
    analysis::write_scatter_csv(f, s);
  }
  {
    std::ofstream f = open_out(matrix);
    analysis::write_matrix_csv(f, analysis::distance_matrix(t.points, metric), t.ids);
  }
  write_json(dir / "report.json", analysis::report_json(s, scatter.string(), matrix.string()));
  out << analysis::to_string(metric) << " correlation: ";
  if (s.correlation) {
    out << *s.correlation;
  } else {
    out << "undefined (zero variance)";
  }
  out << " over " << s.pairs.size() << " pairs\n";
  return kOk;
}

// ---- sarkar ----

int cmd_sarkar(const std::string& tree_path, double tau, const std::string& out_dir, std::ostream& out) {
  sarkar::Tree tree;
  try {
    tree = sarkar::load_tree(tree_path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  sarkar::TreeEmbedding e;
  try {
    e = sarkar::embed_tree(tree, tau);
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }
  const auto report = sarkar::distortion_report(e);
  const fs::path dir(out_dir);
  {
    std::ofstream f = open_out(dir / "embedding.csv");
    sarkar::write_csv(f, e);
  }
  write_json(dir / "distortion.json", sarkar::to_json(report));
  out << "embedded " << tree.size() << " nodes; mean distortion " << report.mean << ", max " << report.max << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  tune_allocator();
  CLI::App app{"Weisfeiler-Leman hyperbolic network tools", "wlhn"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic node-regression corpus");
  g->add_option("--kind", gen.spec.kind, "ba or er")->check(CLI::IsMember({"ba", "er"}))->capture_default_str();
  g->add_option("--n", gen.spec.n, "nodes per graph")->capture_default_str();
  auto* opt_m = g->add_option("--m", gen.spec.m, "edges per new node (ba)")->capture_default_str();
  auto* opt_p = g->add_option("--p", gen.spec.p, "edge probability (er)")->capture_default_str();
  opt_m->excludes(opt_p);
  g->add_option("--graphs", gen.spec.graphs, "number of graphs")->capture_default_str();
  g->add_option("--target", gen.target, "density or effective-size")->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "corpus JSON path")->required();

  std::string train_config, train_baseline, train_output;
  auto* t = app.add_subcommand("train", "train a model from a JSON run configuration");
  t->add_option("--config", train_config, "run configuration JSON")->required();
  t->add_option("--baseline", train_baseline, "also train a plain GIN arm")->check(CLI::IsMember({"none", "gin"}));
  t->add_option("--output-dir", train_output, "overrides output_dir from the config");

  EmbedArgs embed;
  auto* e = app.add_subcommand("embed", "export per-class embeddings and the WL hierarchy");
  e->add_option("--config", embed.config, "run configuration JSON")->required();
  e->add_option("--checkpoint", embed.checkpoint, "parameters written by train");
  e->add_option("--layer", embed.layer, "all, final or a layer index")->capture_default_str();
  e->add_option("--space", embed.space, "hyperbolic or euclidean");
  e->add_option("--out", embed.out, "output directory")->required();

  std::string an_emb, an_hier, an_metric = "hyperbolic", an_out;
  std::uint64_t an_seed = 0;
  auto* an = app.add_subcommand("analyze", "correlate embedding distances with WL distances");
  an->add_option("--embeddings", an_emb, "embedding CSV")->required();
  an->add_option("--hierarchy", an_hier, "hierarchy JSON")->required();
  an->add_option("--metric", an_metric, "hyperbolic or euclidean")->capture_default_str();
  an->add_option("--seed", an_seed, "pair sampling seed (large studies)")->capture_default_str();
  an->add_option("--out", an_out, "output directory")->required();

  std::string sk_tree, sk_out;
  double sk_tau = 1.0;
  auto* sk = app.add_subcommand("sarkar", "combinatorial 2-D tree embedding");
  sk->add_option("--tree", sk_tree, "hierarchy JSON or edge list")->required();
  sk->add_option("--tau", sk_tau, "edge length")->capture_default_str();
  sk->add_option("--out", sk_out, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "wlhn: " << ex.what() << '\n';
    return kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (t->parsed()) return cmd_train(train_config, train_baseline, train_output, out);
    if (e->parsed()) return cmd_embed(embed, out);
    if (an->parsed()) return cmd_analyze(an_emb, an_hier, an_metric, an_seed, an_out, out);
    if (sk->parsed()) return cmd_sarkar(sk_tree, sk_tau, sk_out, out);
  } catch (const UsageError& ex) {
    err << "wlhn: " << ex.what() << '\n';
    return kUsage;
  } catch (const NonFiniteError& ex) {
    err << "wlhn: " << ex.what() << '\n';
    return kRuntime;
  } catch (const PrecisionError& ex) {
    err << "wlhn: " << ex.what() << '\n';
    return kRuntime;
  } catch (const std::invalid_argument& ex) {
    err << "wlhn: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    err << "wlhn: " << ex.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace wlhn::cli
