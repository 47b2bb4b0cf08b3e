#pragma once

// Run configuration and the training loop shared by the CLI, the tests and
// the Python module.

#include "wlhn/datasets.hpp"
#include "wlhn/gradnet.hpp"
#include "wlhn/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wlhn::train {

struct DatasetSpec {
  std::string kind = "corpus";  // "tud", "corpus", "builtin" or "generate"
  std::string path;             // TU directory or corpus JSON
  std::string name;             // TU dataset name or builtin graph name
  data::GenSpec gen;            // used by "generate"
};

struct OptimConfig {
  double lr = 1e-3;
  int epochs = 300;
  int batch_size = 32;  // graphs per batch; 0 = all
  double clip_norm = 5.0;
  std::string lr_schedule = "constant";  // "constant" or "cosine" (decays to 0 at the last epoch)
};

struct SplitConfig {
  std::array<double, 3> ratios = {0.6, 0.2, 0.2};
  std::string unit = "auto";  // "graph", "node", or "auto" (node for node tasks)
  std::uint64_t seed = 0;
};

struct RunConfig {
  DatasetSpec dataset;
  model::ModelConfig model;
  OptimConfig optim;
  SplitConfig split;
  std::uint64_t init_seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::string baseline = "none";  // "none" or "gin"
  std::string output_dir = "run";
  bool standardize_targets = true;

  /// Throws std::invalid_argument naming the bad field.
  void validate() const;
};

/// Unknown keys are rejected. The task lives at top level ("task") and is
/// copied into the model section.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Every field, defaults included.
nlohmann::json to_json(const RunConfig& c);
/// Reads WLHN_SEED; when set, it replaces the split, init and shuffle seeds.
void apply_seed_override(RunConfig& c);

/// Names accepted by DatasetSpec{"builtin", "", name}.
std::vector<std::string> builtin_names();
data::Corpus builtin_dataset(const std::string& name);
data::Corpus load_dataset(const DatasetSpec& spec);

/// Sets input_dim and num_outputs from the corpus.
void fit_model_to_corpus(model::ModelConfig& m, const data::Corpus& c);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double test_metric = 0.0;
};

struct TrainResult {
  std::string metric;  // "accuracy" or "mse"
  double untrained_val = 0.0;
  double untrained_test = 0.0;
  std::vector<EpochMetrics> history;
  int best_epoch = 0;  // 0 = untrained
  double best_val = 0.0;
  double test_at_best = 0.0;
  nlohmann::json best_checkpoint;
  double seconds = 0.0;
};

/// Trains on `corpus` with the split and seeds of `cfg`; the model arm
/// comes from cfg.model. Throws NonFiniteError when a loss or gradient
/// goes non-finite.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const data::Corpus& corpus);

  TrainResult run(const std::function<void(const EpochMetrics&)>& on_epoch = {});

  model::Model& model() { return model_; }
  const data::Split& split() const { return split_; }
  bool node_unit() const { return node_unit_; }

  /// Metric on the given items (graph or global node indices).
  double evaluate(const std::vector<int>& items);
  /// Validation and test metrics of the current parameters.
  std::pair<double, double> evaluate_val_test();

 private:
  struct Prepared {
    std::vector<int> graphs;
    Batch batch;
    std::vector<int> rows;  // target rows inside the batch
    grad::Matrix targets;   // regression targets for `rows`
    std::vector<int> labels;
  };
  Prepared prepare(const std::vector<int>& graphs, const std::vector<char>* node_mask) const;
  grad::Var loss(const Prepared& p, grad::Var output) const;
  std::vector<Prepared> prepare_all(const std::vector<int>& items, int batch_size) const;
  void score(const Prepared& p, const grad::Matrix& out, double& total, std::size_t& count) const;
  grad::Matrix eval_output(const Prepared& p);

  RunConfig cfg_;
  const data::Corpus& corpus_;
  model::Model model_;
  data::Split split_;
  bool node_unit_ = false;
  bool regression_ = false;
  data::Standardizer scaler_;
  std::vector<std::int64_t> node_offset_;  // first global node id per graph
  std::vector<Prepared> eval_cache_;       // node splits: val then test
};

}  // namespace wlhn::train
