#include "wlhn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wlhn::data {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::invalid_argument("missing file " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::vector<long long> read_ints(const fs::path& p) {
  std::vector<long long> out;
  for (const auto& line : read_lines(p)) out.push_back(std::stoll(line));
  return out;
}

// Maps raw values to 0..k-1 in ascending order.
std::vector<int> renumber(const std::vector<long long>& raw, int& k) {
  std::map<long long, int> ids;
  for (long long v : raw) ids.emplace(v, 0);
  int next = 0;
  for (auto& [v, id] : ids) id = next++;
  k = next;
  std::vector<int> out;
  out.reserve(raw.size());
  for (long long v : raw) out.push_back(ids[v]);
  return out;
}

}  // namespace

std::int64_t Corpus::total_nodes() const {
  std::int64_t n = 0;
  for (const auto& g : graphs) n += g.num_nodes();
  return n;
}

Eigen::Index Corpus::feature_dim() const { return graphs.empty() ? 1 : graphs.front().feature_dim(); }

Corpus load_tud(const std::string& dir, const std::string& name) {
  const fs::path base = fs::path(dir) / name;
  auto file = [&](const char* suffix) { return fs::path(base.string() + suffix); };
  const auto indicator = read_ints(file("_graph_indicator.txt"));
  const auto raw_labels = read_ints(file("_graph_labels.txt"));
  const auto edge_lines = read_lines(file("_A.txt"));

  Corpus c;
  const auto num_graphs = static_cast<long long>(raw_labels.size());
  const auto n_total = static_cast<long long>(indicator.size());
  std::vector<int> label = renumber(raw_labels, c.num_classes);

  std::vector<int> node_label;
  if (fs::exists(file("_node_labels.txt"))) {
    const auto raw = read_ints(file("_node_labels.txt"));
    if (static_cast<long long>(raw.size()) != n_total) {
      throw std::invalid_argument(name + "_node_labels.txt: " + std::to_string(raw.size()) + " labels for " +
                                  std::to_string(n_total) + " nodes");
    }
    node_label = renumber(raw, c.num_node_labels);
  }

  // Node ids must run graph by graph so features can be sliced per graph.
  for (long long v = 1; v < n_total; ++v) {
    if (indicator[static_cast<std::size_t>(v)] < indicator[static_cast<std::size_t>(v - 1)]) {
      throw std::invalid_argument(name + "_graph_indicator.txt: nodes are not grouped by graph");
    }
  }
  std::vector<NodeId> local(static_cast<std::size_t>(n_total));
  std::vector<NodeId> sizes(static_cast<std::size_t>(num_graphs), 0);
  for (long long v = 0; v < n_total; ++v) {
    const long long gid = indicator[static_cast<std::size_t>(v)];
    if (gid < 1 || gid > num_graphs) {
      throw std::invalid_argument(name + "_graph_indicator.txt: node " + std::to_string(v + 1) +
                                  " refers to graph " + std::to_string(gid));
    }
    local[static_cast<std::size_t>(v)] = sizes[static_cast<std::size_t>(gid - 1)]++;
  }

  std::vector<std::vector<std::pair<NodeId, NodeId>>> edges(static_cast<std::size_t>(num_graphs));
  std::set<std::pair<long long, long long>> directed;
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    std::string line = edge_lines[i];
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long long u = 0, v = 0;
    if (!(ss >> u >> v)) throw std::invalid_argument(name + "_A.txt line " + std::to_string(i + 1) + ": malformed");
    if (u < 1 || u > n_total || v < 1 || v > n_total) {
      throw std::invalid_argument(name + "_A.txt line " + std::to_string(i + 1) + ": dangling node index");
    }
    const long long gu = indicator[static_cast<std::size_t>(u - 1)], gv = indicator[static_cast<std::size_t>(v - 1)];
    if (gu != gv) throw std::invalid_argument(name + "_A.txt line " + std::to_string(i + 1) + ": edge joins two graphs");
    directed.emplace(u, v);
    edges[static_cast<std::size_t>(gu - 1)].emplace_back(local[static_cast<std::size_t>(u - 1)],
                                                         local[static_cast<std::size_t>(v - 1)]);
  }
  for (auto [u, v] : directed) {
    if (u != v && !directed.contains({v, u})) ++c.asymmetric_edges;
  }

  long long first = 0;
  for (long long g = 0; g < num_graphs; ++g) {
    const NodeId n = sizes[static_cast<std::size_t>(g)];
    RowMatrix features;
    if (!node_label.empty()) {
      features = RowMatrix::Zero(n, c.num_node_labels);
      for (NodeId v = 0; v < n; ++v) features(v, node_label[static_cast<std::size_t>(first + v)]) = 1.0;
    }
    Graph graph = Graph::from_edges(n, edges[static_cast<std::size_t>(g)], std::move(features));
    graph.graph_label = label[static_cast<std::size_t>(g)];
    c.graphs.push_back(std::move(graph));
    first += n;
  }
  c.meta = {{"kind", "tud"}, {"params", {{"name", name}}}, {"seed", nullptr}};
  return c;
}

Graph barabasi_albert(NodeId n, int m, std::mt19937_64& rng) {
  if (m < 1 || n <= m) throw std::invalid_argument("barabasi_albert: need 1 <= m < n");
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<NodeId> ends;  // each node repeated deg(v) times
  for (NodeId u = 0; u < m; ++u) {
    for (NodeId v = u + 1; v < m; ++v) {
      edges.emplace_back(u, v);
      ends.push_back(u);
      ends.push_back(v);
    }
  }
  std::vector<NodeId> targets;
  for (NodeId v = m; v < n; ++v) {
    targets.clear();
    while (static_cast<int>(targets.size()) < m) {
      NodeId t;
      if (ends.empty()) {
        t = std::uniform_int_distribution<NodeId>(0, v - 1)(rng);
      } else {
        t = ends[std::uniform_int_distribution<std::size_t>(0, ends.size() - 1)(rng)];
      }
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (NodeId t : targets) {
      edges.emplace_back(t, v);
      ends.push_back(t);
      ends.push_back(v);
    }
  }
  return Graph::from_edges(n, edges);
}

Graph erdos_renyi(NodeId n, double p, std::mt19937_64& rng) {
  if (n < 1 || !(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("erdos_renyi: need n >= 1 and p in [0, 1]");
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (coin(rng)) edges.emplace_back(u, v);
    }
  }
  return Graph::from_edges(n, edges);
}

std::vector<double> ego_density(const Graph& g) {
  const NodeId n = g.num_nodes();
  std::vector<double> out(static_cast<std::size_t>(n));
  std::vector<NodeId> stamp(static_cast<std::size_t>(n), -1);
  std::vector<NodeId> members;
  for (NodeId v = 0; v < n; ++v) {
    members.clear();
    auto visit = [&](NodeId u) {
      if (stamp[static_cast<std::size_t>(u)] != v) {
        stamp[static_cast<std::size_t>(u)] = v;
        members.push_back(u);
      }
    };
    visit(v);
    for (NodeId u : g.neighbors(v)) visit(u);
    const std::size_t one_hop = members.size();
    for (std::size_t i = 1; i < one_hop; ++i) {
      for (NodeId w : g.neighbors(members[i])) visit(w);
    }
    std::int64_t twice_edges = 0;
    for (NodeId u : members) {
      for (NodeId w : g.neighbors(u)) twice_edges += stamp[static_cast<std::size_t>(w)] == v;
    }
    out[static_cast<std::size_t>(v)] = static_cast<double>(twice_edges / 2) / static_cast<double>(members.size());
  }
  return out;
}

std::int64_t neighbour_edges(const Graph& g, NodeId v) {
  const auto nb = g.neighbors(v);
  std::int64_t t = 0;
  for (NodeId u : nb) {
    // Count each neighbour pair once, from its smaller endpoint.
    for (NodeId w : g.neighbors(u)) {
      if (w > u && std::binary_search(nb.begin(), nb.end(), w)) ++t;
    }
  }
  return t;
}

std::vector<double> effective_size(const Graph& g, std::uint64_t* isolated) {
  std::vector<double> out(static_cast<std::size_t>(g.num_nodes()));
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const double deg = g.degree(v);
    if (deg == 0) {
      if (isolated != nullptr) ++*isolated;
      out[static_cast<std::size_t>(v)] = 0.0;
      continue;
    }
    out[static_cast<std::size_t>(v)] = deg - 2.0 * static_cast<double>(neighbour_edges(g, v)) / deg;
  }
  return out;
}

Target parse_target(std::string_view s) {
  if (s == "density") return Target::kDensity;
  if (s == "effective-size") return Target::kEffectiveSize;
  throw std::invalid_argument("unknown target '" + std::string(s) + "'");
}

std::string_view to_string(Target t) { return t == Target::kDensity ? "density" : "effective-size"; }

Corpus generate(const GenSpec& spec) {
  if (spec.graphs < 1) throw std::invalid_argument("gen: graphs must be >= 1");
  if (spec.n < 2) throw std::invalid_argument("gen: n must be >= 2");
  if (spec.kind == "ba" && (spec.m < 1 || spec.m >= spec.n)) throw std::invalid_argument("gen: ba needs 1 <= m < n");
  if (spec.kind == "er" && !(spec.p > 0.0 && spec.p <= 1.0)) throw std::invalid_argument("gen: er needs 0 < p <= 1");
  if (spec.kind != "ba" && spec.kind != "er") throw std::invalid_argument("gen: kind must be ba or er");
  std::mt19937_64 rng(spec.seed);
  Corpus c;
  for (int i = 0; i < spec.graphs; ++i) {
    Graph g = spec.kind == "ba" ? barabasi_albert(spec.n, spec.m, rng) : erdos_renyi(spec.n, spec.p, rng);
    g.node_targets = spec.target == Target::kDensity ? ego_density(g) : effective_size(g, &c.isolated_nodes);
    c.graphs.push_back(std::move(g));
  }
  nlohmann::json params = {{"n", spec.n}, {"graphs", spec.graphs}, {"target", std::string(to_string(spec.target))}};
  if (spec.kind == "ba") params["m"] = spec.m;
  else params["p"] = spec.p;
  c.meta = {{"kind", spec.kind}, {"params", params}, {"seed", spec.seed}};
  return c;
}

nlohmann::json corpus_to_json(const Corpus& c) {
  nlohmann::json graphs = nlohmann::json::array();
  for (const auto& g : c.graphs) {
    nlohmann::json jg;
    jg["num_nodes"] = g.num_nodes();
    nlohmann::json edges = nlohmann::json::array();
    for (auto [u, v] : g.edge_list()) edges.push_back({u, v});
    jg["edges"] = std::move(edges);
    nlohmann::json feats = nlohmann::json::array();
    for (Eigen::Index r = 0; r < g.features().rows(); ++r) {
      feats.push_back(std::vector<double>(g.features().row(r).begin(), g.features().row(r).end()));
    }
    jg["features"] = std::move(feats);
    jg["node_targets"] = g.node_targets;
    if (!g.node_labels.empty()) jg["node_labels"] = g.node_labels;
    if (g.graph_label) jg["label"] = *g.graph_label;
    graphs.push_back(std::move(jg));
  }
  nlohmann::json meta = c.meta;
  meta["num_classes"] = c.num_classes;
  return {{"graphs", std::move(graphs)}, {"meta", std::move(meta)}};
}

Corpus corpus_from_json(const nlohmann::json& j) {
  Corpus c;
  try {
    for (const auto& jg : j.at("graphs")) {
      const auto& jf = jg.at("features");
      const NodeId n = jg.contains("num_nodes") ? jg.at("num_nodes").get<NodeId>() : static_cast<NodeId>(jf.size());
      std::vector<std::pair<NodeId, NodeId>> edges;
      for (const auto& e : jg.at("edges")) edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
      RowMatrix features;
      if (!jf.empty()) {
        if (static_cast<NodeId>(jf.size()) != n) throw std::invalid_argument("corpus: feature rows != num_nodes");
        features.resize(n, static_cast<Eigen::Index>(jf.at(0).size()));
        for (NodeId v = 0; v < n; ++v) {
          const auto row = jf.at(static_cast<std::size_t>(v)).get<std::vector<double>>();
          if (static_cast<Eigen::Index>(row.size()) != features.cols()) throw std::invalid_argument("corpus: ragged features");
          for (std::size_t k = 0; k < row.size(); ++k) features(v, static_cast<Eigen::Index>(k)) = row[k];
        }
      }
      Graph g = Graph::from_edges(n, edges, std::move(features));
      if (jg.contains("node_targets")) g.node_targets = jg.at("node_targets").get<std::vector<double>>();
      if (jg.contains("node_labels")) g.node_labels = jg.at("node_labels").get<std::vector<int>>();
      if (jg.contains("label")) g.graph_label = jg.at("label").get<int>();
      c.graphs.push_back(std::move(g));
    }
    if (j.contains("meta")) c.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("corpus: ") + e.what());
  }
  c.num_classes = c.meta.value("num_classes", 0);
  return c;
}

void save_corpus(const Corpus& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << corpus_to_json(c).dump() << '\n';
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open corpus " + path);
  try {
    return corpus_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("corpus " + path + ": " + e.what());
  }
}

Split split(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r >= 0.0)) throw std::invalid_argument("split: ratios must be nonnegative");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (!(total > 0.0)) throw std::invalid_argument("split: ratios sum to zero");
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0] / total)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1] / total)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

std::vector<std::vector<int>> chunk(std::span<const int> items, int batch_size) {
  std::vector<std::vector<int>> out;
  const std::size_t step = batch_size <= 0 ? std::max<std::size_t>(items.size(), 1) : static_cast<std::size_t>(batch_size);
  for (std::size_t i = 0; i < items.size(); i += step) {
    out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                     items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + step)));
  }
  return out;
}

Batch batch_of(const Corpus& c, std::span<const int> graph_indices) {
  std::vector<const Graph*> gs;
  gs.reserve(graph_indices.size());
  for (int i : graph_indices) gs.push_back(&c.graphs.at(static_cast<std::size_t>(i)));
  return make_batch(gs, graph_indices);
}

Standardizer Standardizer::fit(std::span<const double> values) {
  Standardizer s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  s.stddev = sd > 0.0 ? sd : 1.0;
  return s;
}

}  // namespace wlhn::data
