#pragma once

#include "wlhn/graph.hpp"

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <string_view>
#include <vector>

namespace wlhn::wl {

/// Dense color assignment for every node of a (batch) graph.
struct Coloring {
  int iteration = 0;
  std::vector<int> color_of;  // node -> color id in [0, num_colors)
  int num_colors = 0;

  /// Lowest-indexed node of each color.
  std::vector<NodeId> representatives() const;
  /// Class sizes indexed by color.
  std::vector<int> class_sizes() const;
};

enum class InitialColoring { kFeatures, kMonochromatic, kDegree };

InitialColoring parse_initial_coloring(std::string_view name);
std::string_view to_string(InitialColoring mode);

/// Nodes with bit-identical feature rows share a color; ids follow first
/// occurrence in node order.
Coloring initial_coloring(const Graph& graph, InitialColoring mode = InitialColoring::kFeatures);
/// Same over a list of graphs taken as one disjoint union (node order is
/// graph order, then node order).
Coloring initial_coloring(std::span<const Graph* const> graphs,
                          InitialColoring mode = InitialColoring::kFeatures);

/// One WL step: the new color of v is a dense id for the pair
/// (c(v), sorted multiset of neighbour colors), numbered by first occurrence.
Coloring refine(const Graph& graph, const Coloring& c);

/// c_0 followed by `iterations` refinements.
std::vector<Coloring> color_sequence(const Graph& graph, int iterations,
                                     InitialColoring mode = InitialColoring::kFeatures);

struct HierarchyNode {
  int id = 0;
  int depth = -1;  // -1 for the virtual root
  int color = 0;
  int parent = -1;
  std::vector<NodeId> members;
  std::vector<int> children;
};

/// Tree of WL color classes. Node 0 is the virtual root at depth -1; the
/// classes of coloring t sit at depth t, ordered by color id.
class ColorHierarchy {
 public:
  ColorHierarchy() = default;

  /// Throws std::invalid_argument if some coloring does not refine its
  /// predecessor.
  static ColorHierarchy build(std::span<const Coloring> colorings);

  /// Reassembles a hierarchy from nodes ordered root first, then by
  /// (depth, color). Children lists are recomputed.
  static ColorHierarchy from_nodes(std::vector<HierarchyNode> nodes);

  std::size_t size() const { return nodes_.size(); }
  const HierarchyNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<HierarchyNode>& nodes() const { return nodes_; }
  int root() const { return 0; }
  /// Number of coloring levels (max depth + 1).
  int levels() const { return static_cast<int>(level_offsets_.size()) - 1; }

  /// Id of the class with `color` at `depth` (depth -1 gives the root).
  int node_at(int depth, int color) const;
  /// Hierarchy nodes at one depth, in color order.
  std::span<const HierarchyNode> level(int depth) const;

  int lowest_common_ancestor(int a, int b) const;

 private:
  std::vector<HierarchyNode> nodes_;
  std::vector<int> level_offsets_;  // first id of each depth 0..levels
};

/// Number of tree edges between a and b.
int wl_distance(const ColorHierarchy& h, int a, int b);

/// {"nodes": [{"id", "depth", "color", "parent", "members"}]}; the root's
/// parent is null.
nlohmann::json to_json(const ColorHierarchy& h);
/// Inverse of to_json. Nodes must be listed root first, then by
/// (depth, color).
ColorHierarchy hierarchy_from_json(const nlohmann::json& j);

}  // namespace wlhn::wl
