#pragma once

// Small reverse-mode autodiff over dense row-major matrices.
//
// A Tape records every operation in creation order, which is already a
// topological order; backward() walks it once in reverse. Gradients add
// into parents, so shared subexpressions accumulate. One tape belongs to
// one thread.

#include "wlhn/graph.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace wlhn::grad {

using Matrix = RowMatrix;
using Rng = std::mt19937_64;

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  /// Gradient after Tape::backward; zeros if nothing flowed here.
  Matrix grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  bool trainable = true;
};

/// Named trainable tensors plus non-trainable buffers (batch-norm running
/// statistics). Parameters keep insertion order, which fixes the update
/// order and the checkpoint layout.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Matrix init, bool trainable = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  Matrix& buffer(const std::string& name, const Matrix& init);
  Matrix& buffer(const std::string& name);
  const std::vector<std::string>& buffer_names() const { return buffer_order_; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  double grad_norm() const;
  /// Rescales all gradients so their global norm is at most max_norm;
  /// returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  long step = 0;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, Matrix> buffers_;
  std::vector<std::string> buffer_order_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam on every trainable parameter, then clears gradients.
void adam_step(ParamStore& store, const AdamConfig& cfg);

/// Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +...].
Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

inline constexpr int kCheckpointVersion = 1;
nlohmann::json checkpoint_to_json(const ParamStore& store);
/// Overwrites values of parameters/buffers present in both; throws on a
/// version or shape mismatch.
void load_checkpoint(ParamStore& store, const nlohmann::json& j);

class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to a parameter; backward adds into p.grad.
  Var param(Parameter& p);

  /// Seeds d(out)/d(out) = 1 (out must be 1x1) and back-propagates.
  void backward(Var out);

  // Used by op implementations.
  Var record(Matrix value, std::vector<int> parents, Backward fn);
  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Materializes the gradient buffer on first use.
  Matrix& grad(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> parents;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Dense algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var x, double s);
/// x * s for a 1x1 variable s.
Var scale_by(Var x, Var s);
/// x + broadcast of the 1 x cols row `bias`.
Var add_row(Var x, Var bias);
Var linear(Var x, Var weight, Var bias);
Var relu(Var x);
Var tanh(Var x);
Var sum(Var x);
Var mean(Var x);

struct BatchNormState {
  Matrix* running_mean;
  Matrix* running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
/// Per-column normalization. In training mode with more than one row it
/// uses batch statistics and updates the running ones; otherwise it uses
/// the running statistics.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState state, bool training);
/// Inverted dropout: scales kept entries by 1/(1-p) when training.
Var dropout(Var x, double p, Rng& rng, bool training);

inline constexpr double kZeroRowEps = 1e-12;
/// Unit-norm rows; rows with norm < kZeroRowEps become (1/sqrt(d), ...)
/// and pass no gradient.
Var row_normalize(Var x);

// Graph structure.
/// Row v <- sum of rows of N(v), neighbours in ascending order.
Var scatter_sum(Var x, const Graph& graph);
/// Row s <- sum of rows i with segment[i] == s.
Var segment_sum(Var x, std::span<const int> segment, int num_segments);
/// Row i <- x.row(index[i]).
Var gather_rows(Var x, std::span<const int> index);

// Losses.
/// Mean over rows of the log-sum-exp stabilized negative log-likelihood.
Var cross_entropy(Var logits, std::span<const int> labels);
/// Mean of squared differences over all entries.
Var mse(Var pred, const Matrix& target);

// Row-wise Poincare-ball maps, each row an independent point.
/// log_0 of every row: artanh(|y|) y/|y|.
Var log0_rows(Var y);
/// exp_0 of every row: tanh(|v|) v/|v|.
Var exp0_rows(Var v);
/// Row i <- inversion swapping centers.row(i) and the origin, applied to
/// x.row(i). Rows whose center is ~0 are passed through.
Var inversion_rows(Var centers, Var x);
/// Row i <- Householder reflection sending `from` to the unit direction of
/// targets.row(i), applied to x.row(i).
Var householder_rows(Var targets, Var x, const Eigen::RowVectorXd& from);
/// Pulls rows with norm above max_norm back onto that radius.
Var clamp_rows_to_ball(Var x, double max_norm);

}  // namespace wlhn::grad
