#pragma once

// Combinatorial tree embedding in the Poincare disk: every edge gets
// hyperbolic length tau, children spread evenly around their parent.

#include "wlhn/graph.hpp"
#include "wlhn/wlcolor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wlhn::sarkar {

/// Rooted tree over nodes 0..n-1. `labels` carries the external ids used
/// in files.
struct Tree {
  std::vector<int> parent;  // -1 for the root
  std::vector<std::vector<int>> children;
  std::vector<int> depth;
  std::vector<long long> labels;
  int root = 0;

  /// Throws std::invalid_argument unless `parent` describes one rooted tree.
  static Tree from_parents(std::vector<int> parent, std::vector<long long> labels = {});
  int size() const { return static_cast<int>(parent.size()); }
  /// Number of edges on the path between a and b.
  int distance(int a, int b) const;
};

Tree tree_from_hierarchy(const wl::ColorHierarchy& h);
/// First line: root id. Every further nonblank line: "parent child".
Tree read_edge_list(std::istream& in);
/// Hierarchy JSON when the path ends in .json, edge list otherwise.
Tree load_tree(const std::string& path);

struct TreeEmbedding {
  Tree tree;
  double tau = 1.0;
  RowMatrix points;  // n x 2, row i = node i
};

/// Root at the origin, its children at angles 2 pi i / deg(root); every
/// other node a places its children at angles theta + 2 pi i / deg(a),
/// i = 1..deg(a)-1, after moving a to the origin (theta = direction of the
/// parent). Throws std::invalid_argument for tau <= 0 and PrecisionError
/// when a point would leave the representable ball.
TreeEmbedding embed_tree(const Tree& tree, double tau);

struct DistortionReport {
  double mean = 0.0;
  double max = 0.0;
  std::optional<double> correlation;
  std::size_t pairs = 0;
  bool sampled = false;
};

/// |d_ball / (tau d_tree) - 1| over all pairs of distinct nodes, or over
/// `sample_pairs` uniformly drawn pairs above `max_exact_nodes` nodes.
DistortionReport distortion_report(const TreeEmbedding& e, std::uint64_t seed = 0,
                                   std::size_t max_exact_nodes = 4000,
                                   std::size_t sample_pairs = 100000);

nlohmann::json to_json(const DistortionReport& r);
/// "node_id,x,y" with external ids.
void write_csv(std::ostream& out, const TreeEmbedding& e);

}  // namespace wlhn::sarkar
