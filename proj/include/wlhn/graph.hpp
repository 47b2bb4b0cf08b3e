#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace wlhn {

using NodeId = std::int32_t;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Immutable undirected simple graph with sorted adjacency (CSR layout).
class Graph {
 public:
  Graph() = default;

  /// Builds from an arbitrary edge list: duplicates collapse, self-loops
  /// drop, every edge is stored in both directions. `features` must have
  /// `num_nodes` rows; an empty matrix means one constant feature of 1.
  static Graph from_edges(NodeId num_nodes,
                          std::span<const std::pair<NodeId, NodeId>> edges,
                          RowMatrix features = {});

  NodeId num_nodes() const { return static_cast<NodeId>(offsets_.size()) - 1; }
  std::int64_t num_edges() const { return static_cast<std::int64_t>(neighbors_.size()) / 2; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v],
            static_cast<std::size_t>(offsets_[v + 1] - offsets_[v])};
  }
  NodeId degree(NodeId v) const { return static_cast<NodeId>(offsets_[v + 1] - offsets_[v]); }
  bool has_edge(NodeId u, NodeId v) const;

  /// Each undirected edge once, with u < v, in ascending order.
  std::vector<std::pair<NodeId, NodeId>> edge_list() const;

  const RowMatrix& features() const { return features_; }
  Eigen::Index feature_dim() const { return features_.cols(); }

  std::optional<int> graph_label;
  std::vector<double> node_targets;
  std::vector<int> node_labels;

 private:
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> neighbors_;
  RowMatrix features_;
};

/// Disjoint union of several graphs. Node indices of graph g are offset by
/// graph_offsets[g].
struct Batch {
  Graph graph;
  std::vector<int> graph_of_node;
  std::vector<NodeId> graph_offsets;  // size num_graphs + 1
  std::vector<int> source_index;      // corpus index of each packed graph

  int num_graphs() const { return static_cast<int>(graph_offsets.size()) - 1; }
};

Batch make_batch(std::span<const Graph* const> graphs, std::span<const int> source_index = {});

}  // namespace wlhn
