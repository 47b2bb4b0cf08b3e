#include "wlhn/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace wlhn {

Graph Graph::from_edges(NodeId num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                        RowMatrix features) {
  if (num_nodes < 0) throw std::invalid_argument("negative node count");
  std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(num_nodes));
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes) {
      throw std::out_of_range("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") outside node range " + std::to_string(num_nodes));
    }
    if (u == v) continue;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  Graph g;
  g.offsets_.assign(1, 0);
  g.offsets_.reserve(static_cast<std::size_t>(num_nodes) + 1);
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    g.neighbors_.insert(g.neighbors_.end(), list.begin(), list.end());
    g.offsets_.push_back(static_cast<std::int64_t>(g.neighbors_.size()));
  }
  if (features.size() == 0) {
    g.features_ = RowMatrix::Ones(num_nodes, 1);
  } else {
    if (features.rows() != num_nodes) {
      throw std::invalid_argument("feature rows (" + std::to_string(features.rows()) +
                                  ") differ from node count (" + std::to_string(num_nodes) + ")");
    }
    g.features_ = std::move(features);
  }
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edge_list() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(static_cast<std::size_t>(num_edges()));
  for (NodeId u = 0; u < num_nodes(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

Batch make_batch(std::span<const Graph* const> graphs, std::span<const int> source_index) {
  if (graphs.empty()) throw std::invalid_argument("empty batch");
  const Eigen::Index fdim = graphs.front()->feature_dim();
  NodeId total = 0;
  for (const Graph* g : graphs) {
    if (g->feature_dim() != fdim) throw std::invalid_argument("feature width differs within batch");
    total += g->num_nodes();
  }

  Batch batch;
  batch.graph_offsets.reserve(graphs.size() + 1);
  batch.graph_of_node.reserve(static_cast<std::size_t>(total));
  RowMatrix features(total, fdim);
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<double> targets;
  std::vector<int> labels;
  bool all_targets = true;
  bool all_labels = true;

  NodeId offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = *graphs[gi];
    batch.graph_offsets.push_back(offset);
    for (auto [u, v] : g.edge_list()) edges.emplace_back(u + offset, v + offset);
    if (g.num_nodes() > 0) features.middleRows(offset, g.num_nodes()) = g.features();
    for (NodeId v = 0; v < g.num_nodes(); ++v) batch.graph_of_node.push_back(static_cast<int>(gi));
    all_targets = all_targets && static_cast<NodeId>(g.node_targets.size()) == g.num_nodes();
    all_labels = all_labels && static_cast<NodeId>(g.node_labels.size()) == g.num_nodes();
    if (all_targets) targets.insert(targets.end(), g.node_targets.begin(), g.node_targets.end());
    if (all_labels) labels.insert(labels.end(), g.node_labels.begin(), g.node_labels.end());
    offset += g.num_nodes();
  }
  batch.graph_offsets.push_back(offset);

  batch.graph = Graph::from_edges(total, edges, std::move(features));
  if (all_targets) batch.graph.node_targets = std::move(targets);
  if (all_labels) batch.graph.node_labels = std::move(labels);
  if (graphs.size() == 1) batch.graph.graph_label = graphs.front()->graph_label;

  if (source_index.empty()) {
    batch.source_index.resize(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) batch.source_index[i] = static_cast<int>(i);
  } else {
    batch.source_index.assign(source_index.begin(), source_index.end());
  }
  return batch;
}

}  // namespace wlhn
