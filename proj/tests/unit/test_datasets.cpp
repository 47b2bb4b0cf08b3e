#include "wlhn/datasets.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>

using namespace wlhn;
using Edges = std::vector<std::pair<NodeId, NodeId>>;

namespace {

// Ego density from BFS distances and a scan of the full edge list.
double ego_density_oracle(const Graph& g, NodeId v) {
  std::vector<int> dist(static_cast<std::size_t>(g.num_nodes()), -1);
  std::queue<NodeId> q;
  dist[static_cast<std::size_t>(v)] = 0;
  q.push(v);
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (NodeId w : g.neighbors(u)) {
      if (dist[static_cast<std::size_t>(w)] < 0) {
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
        q.push(w);
      }
    }
  }
  auto inside = [&](NodeId u) { return dist[static_cast<std::size_t>(u)] >= 0 && dist[static_cast<std::size_t>(u)] <= 2; };
  const auto nodes = std::count_if(dist.begin(), dist.end(), [](int d) { return d >= 0 && d <= 2; });
  std::int64_t edges = 0;
  for (auto [a, b] : g.edge_list()) edges += inside(a) && inside(b);
  return static_cast<double>(edges) / static_cast<double>(nodes);
}

double effective_size_oracle(const Graph& g, NodeId v) {
  const auto nb = g.neighbors(v);
  const double k = static_cast<double>(nb.size());
  if (k == 0) return 0.0;
  double t = 0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    for (std::size_t j = i + 1; j < nb.size(); ++j) t += g.has_edge(nb[i], nb[j]);
  }
  return k - 2.0 * t / k;
}

}  // namespace

TEST_CASE("TU files load into labelled graphs") {
  const auto c = data::load_tud(WLHN_TEST_DATA_DIR "/TINY", "TINY");
  REQUIRE(c.graphs.size() == 2);
  CHECK(c.num_classes == 2);
  CHECK(c.num_node_labels == 3);
  CHECK(c.graphs[0].num_nodes() == 3);
  CHECK(c.graphs[0].num_edges() == 3);
  CHECK(c.graphs[1].num_edges() == 1);
  CHECK(*c.graphs[0].graph_label == 0);
  CHECK(*c.graphs[1].graph_label == 1);
  CHECK(c.asymmetric_edges == 1);
  // labels 3,3,5 | 5,7 become one-hot columns 0,0,1 | 1,2
  CHECK(c.graphs[0].features()(2, 1) == 1.0);
  CHECK(c.graphs[1].features()(1, 2) == 1.0);
  CHECK(c.graphs[1].features().row(0).sum() == 1.0);
}

TEST_CASE("malformed TU files are rejected") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "wlhn_bad_tud";
  fs::create_directories(dir);
  auto write = [&](const std::string& f, const std::string& text) { std::ofstream(dir / f) << text; };
  write("BAD_graph_indicator.txt", "1\n1\n2\n");
  write("BAD_graph_labels.txt", "0\n1\n");
  write("BAD_A.txt", "1, 9\n");
  CHECK_THROWS_AS(data::load_tud(dir.string(), "BAD"), std::invalid_argument);
  write("BAD_A.txt", "1, 3\n");
  CHECK_THROWS_AS(data::load_tud(dir.string(), "BAD"), std::invalid_argument);
  write("BAD_graph_indicator.txt", "1\n2\n1\n");
  write("BAD_A.txt", "1, 3\n");
  CHECK_THROWS_AS(data::load_tud(dir.string(), "BAD"), std::invalid_argument);
  CHECK_THROWS(data::load_tud(dir.string(), "MISSING"));
  fs::remove_all(dir);
}

TEST_CASE("ego density examples") {
  const Graph triangle = Graph::from_edges(3, Edges{{0, 1}, {1, 2}, {0, 2}});
  for (double d : data::ego_density(triangle)) CHECK(d == 1.0);
  const Graph star = Graph::from_edges(5, Edges{{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  CHECK(data::ego_density(star)[0] == doctest::Approx(0.8));
  CHECK(data::ego_density(star)[1] == doctest::Approx(0.8));
}

TEST_CASE("ego density and effective size match brute force") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const Graph g = trial % 2 == 0 ? data::barabasi_albert(150, 3, rng) : data::erdos_renyi(150, 0.04, rng);
    const auto dens = data::ego_density(g);
    const auto eff = data::effective_size(g);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      CHECK(dens[static_cast<std::size_t>(v)] == doctest::Approx(ego_density_oracle(g, v)).epsilon(1e-14));
      CHECK(eff[static_cast<std::size_t>(v)] == doctest::Approx(effective_size_oracle(g, v)).epsilon(1e-14));
    }
  }
}

TEST_CASE("effective size examples") {
  // node 0 joined to a 4-clique: every neighbour pair is linked
  Edges e{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  for (NodeId u = 1; u <= 4; ++u) {
    for (NodeId v = u + 1; v <= 4; ++v) e.emplace_back(u, v);
  }
  const Graph g = Graph::from_edges(6, e);  // node 5 isolated
  std::uint64_t isolated = 0;
  const auto eff = data::effective_size(g, &isolated);
  CHECK(eff[0] == doctest::Approx(1.0));
  CHECK(eff[5] == 0.0);
  CHECK(isolated == 1);
  const Graph star = Graph::from_edges(4, Edges{{0, 1}, {0, 2}, {0, 3}});
  CHECK(data::effective_size(star)[0] == 3.0);
}

TEST_CASE("preferential attachment edge count") {
  std::mt19937_64 rng(3);
  for (int m : {1, 2, 5, 10}) {
    const NodeId n = 300;
    const Graph g = data::barabasi_albert(n, m, rng);
    CHECK(g.num_nodes() == n);
    CHECK(g.num_edges() == static_cast<std::int64_t>(m) * (n - m) + m * (m - 1) / 2);
  }
  CHECK_THROWS_AS(data::barabasi_albert(5, 5, rng), std::invalid_argument);
}

TEST_CASE("random graph mean degree") {
  std::mt19937_64 rng(9);
  const Graph g = data::erdos_renyi(1000, 0.008, rng);
  const double mean_degree = 2.0 * static_cast<double>(g.num_edges()) / 1000.0;
  CHECK(mean_degree > 6.0);
  CHECK(mean_degree < 10.0);
}

TEST_CASE("generated corpora are deterministic and round trip") {
  data::GenSpec s;
  s.kind = "er";
  s.n = 120;
  s.p = 0.05;
  s.graphs = 3;
  s.target = data::Target::kEffectiveSize;
  s.seed = 12;
  const auto a = data::corpus_to_json(data::generate(s));
  const auto b = data::corpus_to_json(data::generate(s));
  CHECK(a.dump() == b.dump());
  const auto back = data::corpus_from_json(a);
  CHECK(data::corpus_to_json(back).dump() == a.dump());
  CHECK(back.graphs.size() == 3);
  CHECK(back.graphs[0].node_targets.size() == 120);
  s.seed = 13;
  CHECK(data::corpus_to_json(data::generate(s)).dump() != a.dump());
  s.kind = "ba";
  s.m = 200;
  CHECK_THROWS_AS(data::generate(s), std::invalid_argument);
}

TEST_CASE("splits and batches") {
  const auto s = data::split(10, {0.6, 0.2, 0.2}, 1);
  CHECK(s.train.size() == 6);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);
  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 10);
  CHECK(data::split(10, {0.6, 0.2, 0.2}, 1).train == s.train);

  const std::vector<int> items{0, 1, 2, 3, 4};
  CHECK(data::chunk(items, 2).size() == 3);
  CHECK(data::chunk(items, 0).size() == 1);

  data::Corpus c;
  c.graphs.push_back(Graph::from_edges(3, Edges{{0, 1}, {1, 2}, {0, 2}}));
  c.graphs.push_back(Graph::from_edges(3, Edges{{0, 1}, {1, 2}, {0, 2}}));
  const std::vector<int> both{0, 1};
  const Batch b = data::batch_of(c, both);
  CHECK(b.graph.num_nodes() == 6);
  CHECK(b.graph.num_edges() == 6);
  CHECK(b.graph_of_node == std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK_FALSE(b.graph.has_edge(2, 3));
}

TEST_CASE("standardizer") {
  const std::vector<double> v{1.0, 2.0, 3.0};
  const auto s = data::Standardizer::fit(v);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.stddev == doctest::Approx(std::sqrt(2.0 / 3.0)));
  const std::vector<double> flat{4.0, 4.0};
  CHECK(data::Standardizer::fit(flat).stddev == 1.0);
}
