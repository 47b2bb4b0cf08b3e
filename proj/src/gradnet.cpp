#include "wlhn/gradnet.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace wlhn::grad {
namespace {

void require_same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) throw std::invalid_argument("variables live on different tapes");
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

Matrix Var::grad() const {
  if (tape_->has_grad(id_)) return tape_->grad(id_);
  return Matrix::Zero(rows(), cols());
}

// ---------------------------------------------------------------- Tape

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = p.trainable;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::vector<int> parents, Backward fn) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) n.requires_grad = n.requires_grad || requires_grad(p);
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape() != this) throw std::invalid_argument("backward: variable from another tape");
  if (out.rows() != 1 || out.cols() != 1) throw std::invalid_argument("backward: output must be 1x1");
  grad(out.id()).setConstant(1.0);
  for (int id = out.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->grad = Matrix::Zero(n.value.rows(), n.value.cols());
      n.param->grad += n.grad;
    }
  }
}

// ---------------------------------------------------------------- ParamStore

Parameter& ParamStore::add(const std::string& name, Matrix init, bool trainable) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->adam_m = Matrix::Zero(init.rows(), init.cols());
  p->adam_v = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->trainable = trainable;
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return *params_[it->second];
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return *params_[it->second];
}

Matrix& ParamStore::buffer(const std::string& name, const Matrix& init) {
  auto [it, inserted] = buffers_.try_emplace(name, init);
  if (inserted) buffer_order_.push_back(name);
  return it->second;
}

Matrix& ParamStore::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw std::out_of_range("no buffer '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) {
    if (p->trainable) s += p->grad.squaredNorm();
  }
  return std::sqrt(s);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& p : params_) p->grad *= f;
  }
  return norm;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  ++store.step;
  const double t = static_cast<double>(store.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    if (!p.trainable) continue;
    p.adam_m = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * p.grad;
    p.adam_v = cfg.beta2 * p.adam_v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= cfg.lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + cfg.eps);
  }
  store.zero_grad();
}

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}},
          {"values", std::vector<double>(m.data(), m.data() + m.size())}};
}

void matrix_from_json(const nlohmann::json& j, Matrix& m, const std::string& name) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols() ||
      static_cast<Eigen::Index>(values.size()) != m.size()) {
    throw std::invalid_argument("checkpoint: shape mismatch for '" + name + "'");
  }
  std::copy(values.begin(), values.end(), m.data());
}

}  // namespace

nlohmann::json checkpoint_to_json(const ParamStore& store) {
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t i = 0; i < store.size(); ++i) params[store[i].name] = matrix_to_json(store[i].value);
  nlohmann::json buffers = nlohmann::json::object();
  auto& mutable_store = const_cast<ParamStore&>(store);
  for (const auto& name : store.buffer_names()) buffers[name] = matrix_to_json(mutable_store.buffer(name));
  return {{"version", kCheckpointVersion}, {"step", store.step}, {"params", params}, {"buffers", buffers}};
}

void load_checkpoint(ParamStore& store, const nlohmann::json& j) {
  if (j.value("version", -1) != kCheckpointVersion) {
    throw std::invalid_argument("checkpoint: unsupported version");
  }
  const auto& params = j.at("params");
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    if (!params.contains(p.name)) throw std::invalid_argument("checkpoint: missing '" + p.name + "'");
    matrix_from_json(params[p.name], p.value, p.name);
  }
  if (j.contains("buffers")) {
    for (const auto& name : store.buffer_names()) {
      if (j["buffers"].contains(name)) matrix_from_json(j["buffers"][name], store.buffer(name), name);
    }
  }
  store.step = j.value("step", 0L);
}

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  require_shape(a.cols() == b.rows(), "matmul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) -= g;
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
    if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

Var scale(Var x, double s) {
  const int ix = x.id();
  return x.tape()->record(x.value() * s, {ix}, [ix, s](Tape& t, int self) {
    t.grad(ix) += s * t.grad(self);
  });
}

Var scale_by(Var x, Var s) {
  require_same_tape(x, s);
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale_by: factor must be 1x1");
  const int ix = x.id(), is = s.id();
  return x.tape()->record(x.value() * s.scalar(), {ix, is}, [ix, is](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ix)) t.grad(ix) += t.value(is)(0, 0) * g;
    if (t.requires_grad(is)) t.grad(is)(0, 0) += g.cwiseProduct(t.value(ix)).sum();
  });
}

Var add_row(Var x, Var bias) {
  require_same_tape(x, bias);
  require_shape(bias.rows() == 1 && bias.cols() == x.cols(), "add_row", x.value(), bias.value());
  const int ix = x.id(), ib = bias.id();
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  return x.tape()->record(std::move(out), {ix, ib}, [ix, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ix)) t.grad(ix) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
  });
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

Var relu(Var x) {
  const int ix = x.id();
  return x.tape()->record(x.value().cwiseMax(0.0), {ix}, [ix](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.grad(ix) += (t.value(ix).array() > 0.0).select(g, 0.0);
  });
}

Var tanh(Var x) {
  const int ix = x.id();
  Matrix out = x.value().array().tanh().matrix();
  return x.tape()->record(std::move(out), {ix}, [ix](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.grad(ix).array() += t.grad(self).array() * (1.0 - y.array().square());
  });
}

Var sum(Var x) {
  const int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape()->record(std::move(out), {ix}, [ix](Tape& t, int self) {
    t.grad(ix).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), n > 0 ? 1.0 / n : 0.0);
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState state, bool training) {
  require_same_tape(x, gamma);
  require_same_tape(x, beta);
  const Eigen::Index n = x.rows(), d = x.cols();
  if (gamma.cols() != d || beta.cols() != d) throw std::invalid_argument("batch_norm: width mismatch");
  Matrix& rmean = *state.running_mean;
  Matrix& rvar = *state.running_var;
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();

  if (training && n > 1) {
    const Eigen::RowVectorXd mu = x.value().colwise().mean();
    Matrix centered = x.value().rowwise() - mu;
    const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    const Eigen::RowVectorXd inv_std = (var.array() + state.eps).rsqrt();
    Matrix xhat = centered.array().rowwise() * inv_std.array();
    Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                 beta.value().row(0).array();
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    rmean = (1.0 - state.momentum) * rmean + state.momentum * mu;
    rvar = (1.0 - state.momentum) * rvar + state.momentum * unbias * var;
    return x.tape()->record(
        std::move(out), {ix, ig, ib},
        [ix, ig, ib, xhat = std::move(xhat), inv_std, n](Tape& t, int self) {
          const Matrix& g = t.grad(self);
          if (t.requires_grad(ig)) t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
          if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
          if (t.requires_grad(ix)) {
            const Matrix dxhat = g.array().rowwise() * t.value(ig).row(0).array();
            const Eigen::RowVectorXd s1 = dxhat.colwise().sum();
            const Eigen::RowVectorXd s2 = dxhat.cwiseProduct(xhat).colwise().sum();
            const double nn = static_cast<double>(n);
            Matrix dx = (nn * dxhat.array() - (xhat.array().rowwise() * s2.array())).rowwise() -
                        s1.array();
            dx.array().rowwise() *= inv_std.array() / nn;
            t.grad(ix) += dx;
          }
        });
  }

  const Eigen::RowVectorXd inv_std = (rvar.row(0).array() + state.eps).rsqrt();
  Matrix xhat = (x.value().rowwise() - rmean.row(0)).array().rowwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return x.tape()->record(std::move(out), {ix, ig, ib},
                          [ix, ig, ib, xhat = std::move(xhat), inv_std](Tape& t, int self) {
                            const Matrix& g = t.grad(self);
                            if (t.requires_grad(ig)) t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
                            if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
                            if (t.requires_grad(ix)) {
                              t.grad(ix).array() += g.array().rowwise() *
                                                    (t.value(ig).row(0).array() * inv_std.array());
                            }
                          });
}

Var dropout(Var x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : 0.0;
  const int ix = x.id();
  Matrix out = x.value().cwiseProduct(mask);
  return x.tape()->record(std::move(out), {ix}, [ix, mask = std::move(mask)](Tape& t, int self) {
    t.grad(ix) += t.grad(self).cwiseProduct(mask);
  });
}

Var row_normalize(Var x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix out(n, d);
  Eigen::VectorXd norms(n);
  const double fallback = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    norms[i] = x.value().row(i).norm();
    if (norms[i] < kZeroRowEps) {
      out.row(i).setConstant(fallback);
    } else {
      out.row(i) = x.value().row(i) / norms[i];
    }
  }
  const int ix = x.id();
  return x.tape()->record(std::move(out), {ix}, [ix, norms](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad(ix);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (norms[i] < kZeroRowEps) continue;
      gx.row(i) += (g.row(i) - y.row(i) * y.row(i).dot(g.row(i))) / norms[i];
    }
  });
}

Var scatter_sum(Var x, const Graph& graph) {
  if (x.rows() != graph.num_nodes()) throw std::invalid_argument("scatter_sum: rows differ from node count");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    for (NodeId u : graph.neighbors(v)) out.row(v) += x.value().row(u);
  }
  const int ix = x.id();
  return x.tape()->record(std::move(out), {ix}, [ix, &graph](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(ix);
    // The adjacency is symmetric, so the transpose is the same aggregation.
    for (NodeId v = 0; v < graph.num_nodes(); ++v) {
      for (NodeId u : graph.neighbors(v)) gx.row(v) += g.row(u);
    }
  });
}

Var segment_sum(Var x, std::span<const int> segment, int num_segments) {
  if (static_cast<Eigen::Index>(segment.size()) != x.rows()) {
    throw std::invalid_argument("segment_sum: one segment id per row required");
  }
  Matrix out = Matrix::Zero(num_segments, x.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) out.row(segment[i]) += x.value().row(static_cast<Eigen::Index>(i));
  const int ix = x.id();
  std::vector<int> seg(segment.begin(), segment.end());
  return x.tape()->record(std::move(out), {ix}, [ix, seg = std::move(seg)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(ix);
    for (std::size_t i = 0; i < seg.size(); ++i) gx.row(static_cast<Eigen::Index>(i)) += g.row(seg[i]);
  });
}

Var gather_rows(Var x, std::span<const int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x.rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(index[i]);
  }
  const int ix = x.id();
  std::vector<int> idx(index.begin(), index.end());
  return x.tape()->record(std::move(out), {ix}, [ix, idx = std::move(idx)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(ix);
    for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows(), k = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("cross_entropy: label count");
  Matrix probs(n, k);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw std::out_of_range("cross_entropy: label out of range");
    const double mx = logits.value().row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.value().row(i).array() - mx).exp();
    const double z = e.sum();
    probs.row(i) = e / z;
    loss += (mx + std::log(z)) - logits.value()(i, y);
  }
  Matrix out(1, 1);
  out(0, 0) = n > 0 ? loss / static_cast<double>(n) : 0.0;
  const int il = logits.id();
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.tape()->record(std::move(out), {il},
                               [il, probs = std::move(probs), lab = std::move(lab)](Tape& t, int self) {
                                 const double g = t.grad(self)(0, 0) / static_cast<double>(probs.rows());
                                 Matrix d = probs;
                                 for (std::size_t i = 0; i < lab.size(); ++i) d(static_cast<Eigen::Index>(i), lab[i]) -= 1.0;
                                 t.grad(il) += g * d;
                               });
}

Var mse(Var pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("mse: shape mismatch");
  }
  Matrix diff = pred.value() - target;
  const double count = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = count > 0 ? diff.squaredNorm() / count : 0.0;
  const int ip = pred.id();
  return pred.tape()->record(std::move(out), {ip}, [ip, diff = std::move(diff), count](Tape& t, int self) {
    t.grad(ip) += (2.0 * t.grad(self)(0, 0) / count) * diff;
  });
}

}  // namespace wlhn::grad
