#pragma once

// The WL hyperbolic network: GIN message passing run in lockstep with WL
// color refinement, each layer's color classes placed in the Poincare ball
// at hyperbolic distance tau from their parent class.

#include "wlhn/gradnet.hpp"
#include "wlhn/graph.hpp"
#include "wlhn/wlcolor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace wlhn::model {

enum class Task { kGraphClassification, kNodeRegression, kNodeClassification };
/// kGin is the Euclidean comparison arm: same GIN layers, no hyperbolic
/// construction, mean-of-final-H readout.
enum class Arm { kWlhn, kGin };

Task parse_task(std::string_view s);
std::string_view to_string(Task t);
Arm parse_arm(std::string_view s);
std::string_view to_string(Arm a);
bool is_node_task(Task t);

struct ModelConfig {
  int input_dim = 1;
  int dim = 64;
  int layers = 2;
  double tau = 1.0;
  bool epsilon_trainable = true;
  int mlp_depth = 2;
  double dropout = 0.0;
  std::vector<int> head = {128, 64};
  Task task = Task::kGraphClassification;
  int num_outputs = 2;  // classes, or 1 for regression
  wl::InitialColoring initial_coloring = wl::InitialColoring::kFeatures;
  Arm arm = Arm::kWlhn;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j, const ModelConfig& defaults = {});

/// Geometry recorded by one DiffHypCon call, one row per child class.
struct PlacementTrace {
  grad::Matrix directions;        // unit child directions after rotation, before scaling
  grad::Matrix reflected_parent;  // parent class point after moving the class to the origin
};

/// One DiffHypCon call.
///
/// `child_rep` holds one Euclidean row per child class (nonnegative after
/// ReLU). `prev` holds the class points of the previous depth and
/// `prevprev` those of the depth before (a single zero row stands in for
/// the root). `parent[k]` indexes `prev` and `grandparent[k]` indexes
/// `prevprev`. Every child lands at distance tau from its parent.
grad::Var diff_hyp_con(grad::Var child_rep, grad::Var prev, grad::Var prevprev,
                       std::span<const int> parent, std::span<const int> grandparent, double tau,
                       PlacementTrace* trace = nullptr);

/// The fixed direction (-1/sqrt(d), ..., -1/sqrt(d)) rotated onto the
/// reflected parent.
Eigen::RowVectorXd parent_anchor(Eigen::Index dim);

/// State of one layer, t = 0..T.
struct LayerState {
  int t = 0;
  wl::Coloring coloring;
  std::vector<int> parent;       // class at t -> class at t-1 (0 = root for t = 0)
  std::vector<NodeId> reps;      // lowest-indexed member per class
  grad::Var euclidean_nodes;     // n x d, class-consistent rows of H^(t)
  grad::Var euclidean_classes;   // K_t x d representative rows
  grad::Var hyperbolic_classes;  // K_t x d class points (empty for the GIN arm)
  PlacementTrace trace;
};

struct ForwardResult {
  std::vector<LayerState> layers;
  grad::Var root;          // 1 x d zero point
  grad::Var node_features; // n x d input to the head for node tasks
  grad::Var readout;       // per-graph (graph tasks) or per-node vectors fed to the head
  grad::Var output;        // logits or regression values
};

/// kTrain: batch statistics (running ones updated), dropout on.
/// kEval: running statistics, dropout off.
/// kBatchStats: batch statistics without touching the running ones,
/// dropout off; used to probe untrained models.
enum class Mode { kTrain, kEval, kBatchStats };

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  /// Records a forward pass on `tape`. `batch` must outlive any backward
  /// pass over the result.
  ForwardResult forward(grad::Tape& tape, const Batch& batch, Mode mode, grad::Rng& rng);

  grad::ParamStore& params() { return params_; }
  const grad::ParamStore& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  grad::Var gin_layer(grad::Tape& tape, int t, const Graph& graph, grad::Var h_prev, Mode mode);
  grad::Var head(grad::Tape& tape, grad::Var x, Mode mode, grad::Rng& rng);
  void add_linear(const std::string& name, int in, int out, grad::Rng& rng);
  grad::Var apply_linear(grad::Tape& tape, const std::string& name, grad::Var x);

  ModelConfig cfg_;
  grad::ParamStore params_;
};

/// Index of the largest entry per row; ties go to the lowest index.
std::vector<int> argmax_rows(const grad::Matrix& logits);

/// Detached per-layer snapshot of a forward pass, for analysis and export.
struct EmbeddingSnapshot {
  std::vector<wl::Coloring> colorings;          // t = 0..T
  std::vector<grad::Matrix> hyperbolic_classes; // per t, K_t x d (WLHN arm)
  std::vector<grad::Matrix> euclidean_classes;  // per t, K_t x d
  std::vector<PlacementTrace> traces;
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<NodeId>> reps;
  int dim = 0;

  wl::ColorHierarchy hierarchy() const;
  /// Hyperbolic point per hierarchy node (root = origin).
  grad::Matrix hyperbolic_by_hierarchy_node() const;
  /// Euclidean vector per hierarchy node (root = zero vector).
  grad::Matrix euclidean_by_hierarchy_node() const;
};

/// Detached copy of the layer states of one forward pass.
EmbeddingSnapshot snapshot(Model& model, const Batch& batch, Mode mode = Mode::kEval);

}  // namespace wlhn::model
