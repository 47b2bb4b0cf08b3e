#pragma once

// Graph corpora: TU-format loading, synthetic generators with structural
// node targets, splits and batching.

#include "wlhn/graph.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wlhn::data {

struct Corpus {
  std::vector<Graph> graphs;
  int num_classes = 0;      // distinct graph labels (0 if none)
  int num_node_labels = 0;  // width of the one-hot node features (0 if none)
  nlohmann::json meta = nlohmann::json::object();
  std::uint64_t asymmetric_edges = 0;  // edges whose reverse was missing in the input
  std::uint64_t isolated_nodes = 0;    // nodes assigned a zero effective size

  std::int64_t total_nodes() const;
  Eigen::Index feature_dim() const;
};

/// Reads <dir>/<name>_A.txt, _graph_indicator.txt, _graph_labels.txt and,
/// if present, _node_labels.txt. Graph labels are renumbered 0..k-1 in
/// ascending order of the raw value; node labels likewise, then one-hot.
Corpus load_tud(const std::string& dir, const std::string& name);

/// Preferential attachment from a seed clique on m nodes; every new node
/// links to m distinct existing nodes.
Graph barabasi_albert(NodeId n, int m, std::mt19937_64& rng);
Graph erdos_renyi(NodeId n, double p, std::mt19937_64& rng);

/// Edges divided by nodes of the radius-2 ego network (closed
/// 2-neighbourhood, induced edges).
std::vector<double> ego_density(const Graph& g);
/// Edges among the neighbours of v.
std::int64_t neighbour_edges(const Graph& g, NodeId v);
/// deg(v) - 2 t(v) / deg(v); 0 for isolated nodes, counted in *isolated.
std::vector<double> effective_size(const Graph& g, std::uint64_t* isolated = nullptr);

enum class Target { kDensity, kEffectiveSize };
Target parse_target(std::string_view s);
std::string_view to_string(Target t);

struct GenSpec {
  std::string kind = "ba";  // "ba" or "er"
  NodeId n = 1000;
  int m = 5;
  double p = 0.01;
  int graphs = 10;
  Target target = Target::kDensity;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument for impossible parameters.
Corpus generate(const GenSpec& spec);

/// {"graphs": [{"num_nodes", "edges", "features", "node_targets"[, "label"]}],
///  "meta": {...}}
nlohmann::json corpus_to_json(const Corpus& c);
Corpus corpus_from_json(const nlohmann::json& j);
void save_corpus(const Corpus& c, const std::string& path);
Corpus load_corpus(const std::string& path);

struct Split {
  std::vector<int> train, val, test;
};

/// Seeded shuffle of 0..n-1, then contiguous slices: round(n r0) train,
/// round(n r1) validation, the rest test.
Split split(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed);

/// Consecutive groups of `batch_size` items (0 = one group).
std::vector<std::vector<int>> chunk(std::span<const int> items, int batch_size);

Batch batch_of(const Corpus& c, std::span<const int> graph_indices);

/// Zero-mean unit-variance map fitted on a sample.
struct Standardizer {
  double mean = 0.0;
  double stddev = 1.0;

  static Standardizer fit(std::span<const double> values);
  double apply(double x) const { return (x - mean) / stddev; }
};

}  // namespace wlhn::data
