#include "wlhn/wlcolor.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace wlhn::wl {
namespace {

struct SignatureHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept {
    std::size_t h = 0x9e3779b97f4a7c15ULL ^ v.size();
    for (int x : v) {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

struct BytesHash {
  std::size_t operator()(const std::string& s) const noexcept { return std::hash<std::string>{}(s); }
};

Coloring color_by_key(std::span<const std::string> keys) {
  Coloring c;
  c.color_of.resize(keys.size());
  std::unordered_map<std::string, int, BytesHash> table;
  for (std::size_t v = 0; v < keys.size(); ++v) {
    auto [it, inserted] = table.try_emplace(keys[v], static_cast<int>(table.size()));
    c.color_of[v] = it->second;
  }
  c.num_colors = static_cast<int>(table.size());
  return c;
}

std::string row_bytes(const RowMatrix& m, Eigen::Index row) {
  std::string key(static_cast<std::size_t>(m.cols()) * sizeof(double), '\0');
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double x = m(row, j);
    if (x == 0.0) x = 0.0;  // fold -0.0 into +0.0
    std::memcpy(key.data() + j * sizeof(double), &x, sizeof(double));
  }
  return key;
}

}  // namespace

std::vector<NodeId> Coloring::representatives() const {
  std::vector<NodeId> rep(static_cast<std::size_t>(num_colors), -1);
  for (std::size_t v = 0; v < color_of.size(); ++v) {
    auto& r = rep[static_cast<std::size_t>(color_of[v])];
    if (r < 0) r = static_cast<NodeId>(v);
  }
  return rep;
}

std::vector<int> Coloring::class_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(num_colors), 0);
  for (int c : color_of) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

InitialColoring parse_initial_coloring(std::string_view name) {
  if (name == "features") return InitialColoring::kFeatures;
  if (name == "monochromatic" || name == "uniform") return InitialColoring::kMonochromatic;
  if (name == "degree") return InitialColoring::kDegree;
  throw std::invalid_argument("unknown initial coloring '" + std::string(name) + "'");
}

std::string_view to_string(InitialColoring mode) {
  switch (mode) {
    case InitialColoring::kFeatures: return "features";
    case InitialColoring::kMonochromatic: return "monochromatic";
    case InitialColoring::kDegree: return "degree";
  }
  return "features";
}

Coloring initial_coloring(const Graph& graph, InitialColoring mode) {
  const auto n = static_cast<std::size_t>(graph.num_nodes());
  Coloring c;
  switch (mode) {
    case InitialColoring::kMonochromatic:
      c.color_of.assign(n, 0);
      c.num_colors = n > 0 ? 1 : 0;
      return c;
    case InitialColoring::kDegree: {
      std::vector<std::string> keys(n);
      for (NodeId v = 0; v < graph.num_nodes(); ++v) keys[v] = std::to_string(graph.degree(v));
      return color_by_key(keys);
    }
    case InitialColoring::kFeatures: {
      std::vector<std::string> keys(n);
      for (NodeId v = 0; v < graph.num_nodes(); ++v) keys[v] = row_bytes(graph.features(), v);
      return color_by_key(keys);
    }
  }
  return c;
}

Coloring initial_coloring(std::span<const Graph* const> graphs, InitialColoring mode) {
  if (graphs.empty()) throw std::invalid_argument("initial_coloring: empty batch");
  return initial_coloring(make_batch(graphs).graph, mode);
}

Coloring refine(const Graph& graph, const Coloring& c) {
  if (static_cast<NodeId>(c.color_of.size()) != graph.num_nodes()) {
    throw std::invalid_argument("refine: coloring does not cover the graph");
  }
  Coloring next;
  next.iteration = c.iteration + 1;
  next.color_of.resize(c.color_of.size());
  std::unordered_map<std::vector<int>, int, SignatureHash> table;
  std::vector<int> signature;
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    const auto nb = graph.neighbors(v);
    signature.clear();
    signature.reserve(nb.size() + 1);
    signature.push_back(c.color_of[v]);
    for (NodeId u : nb) signature.push_back(c.color_of[u]);
    std::sort(signature.begin() + 1, signature.end());
    auto [it, inserted] = table.try_emplace(signature, static_cast<int>(table.size()));
    next.color_of[v] = it->second;
  }
  next.num_colors = static_cast<int>(table.size());
  return next;
}

std::vector<Coloring> color_sequence(const Graph& graph, int iterations, InitialColoring mode) {
  std::vector<Coloring> seq;
  seq.reserve(static_cast<std::size_t>(iterations) + 1);
  seq.push_back(initial_coloring(graph, mode));
  for (int t = 0; t < iterations; ++t) seq.push_back(refine(graph, seq.back()));
  return seq;
}

ColorHierarchy ColorHierarchy::build(std::span<const Coloring> colorings) {
  std::vector<HierarchyNode> nodes;
  HierarchyNode root;
  root.id = 0;
  root.depth = -1;
  if (!colorings.empty()) {
    root.members.resize(colorings.front().color_of.size());
    for (std::size_t v = 0; v < root.members.size(); ++v) root.members[v] = static_cast<NodeId>(v);
  }
  nodes.push_back(std::move(root));

  int prev_offset = 0;
  for (std::size_t t = 0; t < colorings.size(); ++t) {
    const Coloring& c = colorings[t];
    const int offset = static_cast<int>(nodes.size());
    std::vector<int> parent_color(static_cast<std::size_t>(c.num_colors), -1);
    if (t > 0 && colorings[t - 1].color_of.size() != c.color_of.size()) {
      throw std::invalid_argument("build_hierarchy: colorings cover different node sets");
    }
    for (int k = 0; k < c.num_colors; ++k) {
      HierarchyNode hn;
      hn.id = offset + k;
      hn.depth = static_cast<int>(t);
      hn.color = k;
      nodes.push_back(std::move(hn));
    }
    for (std::size_t v = 0; v < c.color_of.size(); ++v) {
      const int k = c.color_of[v];
      nodes[static_cast<std::size_t>(offset + k)].members.push_back(static_cast<NodeId>(v));
      if (t == 0) continue;
      const int pc = colorings[t - 1].color_of[v];
      int& slot = parent_color[static_cast<std::size_t>(k)];
      if (slot < 0) {
        slot = pc;
      } else if (slot != pc) {
        throw std::invalid_argument("build_hierarchy: coloring " + std::to_string(t) +
                                    " does not refine coloring " + std::to_string(t - 1));
      }
    }
    for (int k = 0; k < c.num_colors; ++k) {
      nodes[static_cast<std::size_t>(offset + k)].parent =
          t == 0 ? 0 : prev_offset + parent_color[static_cast<std::size_t>(k)];
    }
    prev_offset = offset;
  }
  return from_nodes(std::move(nodes));
}

ColorHierarchy ColorHierarchy::from_nodes(std::vector<HierarchyNode> nodes) {
  if (nodes.empty() || nodes.front().depth != -1 || nodes.front().parent != -1) {
    throw std::invalid_argument("hierarchy: node 0 must be the root at depth -1");
  }
  ColorHierarchy h;
  h.level_offsets_.clear();
  int expected_depth = -1;
  int expected_color = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& n = nodes[i];
    n.children.clear();
    if (n.id != static_cast<int>(i)) throw std::invalid_argument("hierarchy: ids must be 0..n-1 in order");
    if (i == 0) continue;
    if (n.depth == expected_depth + 1) {
      expected_depth = n.depth;
      expected_color = 0;
      h.level_offsets_.push_back(static_cast<int>(i));
    }
    if (n.depth != expected_depth || n.color != expected_color) {
      throw std::invalid_argument("hierarchy: node " + std::to_string(i) +
                                  " out of (depth, color) order");
    }
    ++expected_color;
    if (n.parent < 0 || n.parent >= static_cast<int>(i)) {
      throw std::invalid_argument("hierarchy: node " + std::to_string(i) + " has invalid parent");
    }
    if (nodes[static_cast<std::size_t>(n.parent)].depth != n.depth - 1) {
      throw std::invalid_argument("hierarchy: parent depth mismatch at node " + std::to_string(i));
    }
  }
  h.level_offsets_.push_back(static_cast<int>(nodes.size()));
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    nodes[static_cast<std::size_t>(nodes[i].parent)].children.push_back(static_cast<int>(i));
  }
  h.nodes_ = std::move(nodes);
  return h;
}

int ColorHierarchy::node_at(int depth, int color) const {
  if (depth < 0) return 0;
  if (depth >= levels()) throw std::out_of_range("hierarchy depth " + std::to_string(depth));
  const int id = level_offsets_[static_cast<std::size_t>(depth)] + color;
  if (color < 0 || id >= level_offsets_[static_cast<std::size_t>(depth) + 1]) {
    throw std::out_of_range("hierarchy color " + std::to_string(color) + " at depth " +
                            std::to_string(depth));
  }
  return id;
}

std::span<const HierarchyNode> ColorHierarchy::level(int depth) const {
  if (depth < 0) return {nodes_.data(), 1};
  const auto begin = static_cast<std::size_t>(level_offsets_[static_cast<std::size_t>(depth)]);
  const auto end = static_cast<std::size_t>(level_offsets_[static_cast<std::size_t>(depth) + 1]);
  return {nodes_.data() + begin, end - begin};
}

int ColorHierarchy::lowest_common_ancestor(int a, int b) const {
  while (node(a).depth > node(b).depth) a = node(a).parent;
  while (node(b).depth > node(a).depth) b = node(b).parent;
  while (a != b) {
    a = node(a).parent;
    b = node(b).parent;
  }
  return a;
}

int wl_distance(const ColorHierarchy& h, int a, int b) {
  const int lca = h.lowest_common_ancestor(a, b);
  return h.node(a).depth + h.node(b).depth - 2 * h.node(lca).depth;
}

nlohmann::json to_json(const ColorHierarchy& h) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : h.nodes()) {
    nlohmann::json j;
    j["id"] = n.id;
    j["depth"] = n.depth;
    j["color"] = n.color;
    j["parent"] = n.parent < 0 ? nlohmann::json(nullptr) : nlohmann::json(n.parent);
    j["members"] = n.members;
    nodes.push_back(std::move(j));
  }
  return {{"nodes", std::move(nodes)}};
}

ColorHierarchy hierarchy_from_json(const nlohmann::json& j) {
  if (!j.contains("nodes") || !j["nodes"].is_array()) {
    throw std::invalid_argument("hierarchy JSON: missing 'nodes' array");
  }
  std::vector<HierarchyNode> nodes;
  nodes.reserve(j["nodes"].size());
  for (const auto& jn : j["nodes"]) {
    HierarchyNode n;
    n.id = jn.at("id").get<int>();
    n.depth = jn.at("depth").get<int>();
    n.color = jn.value("color", 0);
    const auto& p = jn.at("parent");
    n.parent = p.is_null() ? -1 : p.get<int>();
    if (jn.contains("members")) n.members = jn["members"].get<std::vector<NodeId>>();
    nodes.push_back(std::move(n));
  }
  return ColorHierarchy::from_nodes(std::move(nodes));
}

}  // namespace wlhn::wl
