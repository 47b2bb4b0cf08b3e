#include "wlhn/sarkar.hpp"

#include "wlhn/analysis.hpp"
#include "wlhn/errors.hpp"
#include "wlhn/hypgeo.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace wlhn::sarkar {

Tree Tree::from_parents(std::vector<int> parent, std::vector<long long> labels) {
  Tree t;
  const int n = static_cast<int>(parent.size());
  if (n == 0) throw std::invalid_argument("tree: no nodes");
  if (labels.empty()) {
    labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i;
  }
  if (static_cast<int>(labels.size()) != n) throw std::invalid_argument("tree: label count");
  t.children.resize(static_cast<std::size_t>(n));
  t.root = -1;
  for (int v = 0; v < n; ++v) {
    const int p = parent[static_cast<std::size_t>(v)];
    if (p == -1) {
      if (t.root != -1) throw std::invalid_argument("tree: more than one root");
      t.root = v;
    } else if (p < 0 || p >= n || p == v) {
      throw std::invalid_argument("tree: bad parent for node " + std::to_string(labels[static_cast<std::size_t>(v)]));
    } else {
      t.children[static_cast<std::size_t>(p)].push_back(v);
    }
  }
  if (t.root == -1) throw std::invalid_argument("tree: no root");
  t.depth.assign(static_cast<std::size_t>(n), -1);
  std::queue<int> q;
  q.push(t.root);
  t.depth[static_cast<std::size_t>(t.root)] = 0;
  int seen = 0;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    ++seen;
    for (int c : t.children[static_cast<std::size_t>(u)]) {
      t.depth[static_cast<std::size_t>(c)] = t.depth[static_cast<std::size_t>(u)] + 1;
      q.push(c);
    }
  }
  if (seen != n) throw std::invalid_argument("tree: not connected to the root (cycle or forest)");
  t.parent = std::move(parent);
  t.labels = std::move(labels);
  return t;
}

int Tree::distance(int a, int b) const {
  int d = 0;
  while (depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)]) a = parent[static_cast<std::size_t>(a)], ++d;
  while (depth[static_cast<std::size_t>(b)] > depth[static_cast<std::size_t>(a)]) b = parent[static_cast<std::size_t>(b)], ++d;
  while (a != b) {
    a = parent[static_cast<std::size_t>(a)];
    b = parent[static_cast<std::size_t>(b)];
    d += 2;
  }
  return d;
}

Tree tree_from_hierarchy(const wl::ColorHierarchy& h) {
  std::vector<int> parent;
  parent.reserve(h.size());
  for (const auto& n : h.nodes()) parent.push_back(n.parent);
  return Tree::from_parents(std::move(parent));
}

Tree read_edge_list(std::istream& in) {
  std::string line;
  long long root = 0;
  bool have_root = false;
  std::vector<std::pair<long long, long long>> edges;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    if (!have_root) {
      if (!(ss >> root)) throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": expected root id");
      have_root = true;
      continue;
    }
    long long p = 0, c = 0;
    if (!(ss >> p >> c)) throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": expected 'parent child'");
    edges.emplace_back(p, c);
  }
  if (!have_root) throw std::invalid_argument("edge list: empty input");
  std::unordered_map<long long, int> index;
  std::vector<long long> labels;
  auto id = [&](long long x) {
    auto [it, inserted] = index.try_emplace(x, static_cast<int>(labels.size()));
    if (inserted) labels.push_back(x);
    return it->second;
  };
  id(root);
  std::vector<int> parent(1, -1);
  for (auto [p, c] : edges) {
    const int pi = id(p);
    const int ci = id(c);
    parent.resize(labels.size(), -2);
    if (parent[static_cast<std::size_t>(ci)] != -2) {
      throw std::invalid_argument("edge list: node " + std::to_string(c) + " has two parents");
    }
    parent[static_cast<std::size_t>(ci)] = pi;
  }
  for (std::size_t v = 0; v < parent.size(); ++v) {
    if (parent[v] == -2) throw std::invalid_argument("edge list: node " + std::to_string(labels[v]) + " has no parent");
  }
  return Tree::from_parents(std::move(parent), std::move(labels));
}

Tree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open tree file " + path);
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    return tree_from_hierarchy(wl::hierarchy_from_json(nlohmann::json::parse(in)));
  }
  return read_edge_list(in);
}

TreeEmbedding embed_tree(const Tree& tree, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("sarkar: tau must be positive");
  const double r = std::tanh(tau / 2.0);
  const double max_norm = 1.0 - hypgeo::kBoundaryEps;
  TreeEmbedding e;
  e.tree = tree;
  e.tau = tau;
  e.points = RowMatrix::Zero(tree.size(), 2);

  auto place = [&](int child, const hypgeo::Vector& p) {
    if (!(p.norm() <= max_norm)) {
      const int depth = tree.depth[static_cast<std::size_t>(child)];
      throw PrecisionError("sarkar: tau = " + std::to_string(tau) + " exhausts double precision at depth " +
                               std::to_string(depth),
                           depth);
    }
    e.points.row(child) = p.transpose();
  };

  std::queue<int> q;
  q.push(tree.root);
  while (!q.empty()) {
    const int a = q.front();
    q.pop();
    const auto& kids = tree.children[static_cast<std::size_t>(a)];
    for (int c : kids) q.push(c);
    if (kids.empty()) continue;
    if (a == tree.root) {
      const double deg = static_cast<double>(kids.size());
      for (std::size_t i = 0; i < kids.size(); ++i) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / deg;
        place(kids[i], hypgeo::Vector{{r * std::cos(phi), r * std::sin(phi)}});
      }
      continue;
    }
    const hypgeo::Inversion inv(hypgeo::Vector(e.points.row(a).transpose()));
    const hypgeo::Vector u = inv.apply(hypgeo::Vector(e.points.row(tree.parent[static_cast<std::size_t>(a)]).transpose()));
    const double theta = std::atan2(u[1], u[0]);
    const double deg = static_cast<double>(kids.size() + 1);
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const double phi = theta + 2.0 * std::numbers::pi * static_cast<double>(i + 1) / deg;
      place(kids[i], inv.apply(hypgeo::Vector{{r * std::cos(phi), r * std::sin(phi)}}));
    }
  }
  return e;
}

DistortionReport distortion_report(const TreeEmbedding& e, std::uint64_t seed, std::size_t max_exact_nodes,
                                   std::size_t sample_pairs) {
  const int n = e.tree.size();
  DistortionReport rep;
  std::vector<double> dball, dtree;
  auto add = [&](int a, int b) {
    const double db = analysis::row_distance(e.points, a, b, analysis::Metric::kHyperbolic);
    const double dt = e.tau * e.tree.distance(a, b);
    dball.push_back(db);
    dtree.push_back(dt);
    const double dist = std::abs(db / dt - 1.0);
    rep.mean += dist;
    rep.max = std::max(rep.max, dist);
  };
  if (static_cast<std::size_t>(n) <= max_exact_nodes) {
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) add(a, b);
    }
  } else {
    rep.sampled = true;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);
    while (dball.size() < sample_pairs) {
      const int a = pick(rng), b = pick(rng);
      if (a != b) add(a, b);
    }
  }
  rep.pairs = dball.size();
  if (rep.pairs > 0) rep.mean /= static_cast<double>(rep.pairs);
  rep.correlation = analysis::pearson(dball, dtree);
  return rep;
}

nlohmann::json to_json(const DistortionReport& r) {
  return {{"mean_distortion", r.mean},
          {"max_distortion", r.max},
          {"correlation", r.correlation ? nlohmann::json(*r.correlation) : nlohmann::json(nullptr)},
          {"n_pairs", r.pairs},
          {"sampled", r.sampled}};
}

void write_csv(std::ostream& out, const TreeEmbedding& e) {
  out.precision(17);
  out << "node_id,x,y\n";
  for (int v = 0; v < e.tree.size(); ++v) {
    out << e.tree.labels[static_cast<std::size_t>(v)] << ',' << e.points(v, 0) << ',' << e.points(v, 1) << '\n';
  }
}

}  // namespace wlhn::sarkar
