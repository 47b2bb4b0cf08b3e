// Acceptance runner. Usage: wlhn_acceptance [N ...]; no arguments runs
// every criterion. Prints one PASS/FAIL line per criterion and exits
// nonzero if any failed.

#include "criteria.hpp"

#include "wlhn/platform.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace wlhn::acceptance {

std::optional<std::string> find_tud(const std::string& name) {
  namespace fs = std::filesystem;
  std::vector<fs::path> roots;
  if (const char* env = std::getenv("WLHN_DATA_DIR")) roots.emplace_back(env);
  roots.emplace_back(WLHN_TEST_DATA_DIR);
  for (const auto& root : roots) {
    for (const auto& dir : {root / name, root}) {
      if (fs::exists(dir / (name + "_A.txt"))) return dir.string();
    }
  }
  return std::nullopt;
}

Graph random_graph(std::mt19937_64& rng, NodeId n, double p) {
  std::vector<std::pair<NodeId, NodeId>> e;
  std::bernoulli_distribution coin(p);
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (coin(rng)) e.emplace_back(u, v);
    }
  }
  return Graph::from_edges(n, e);
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(4) << x;
  return s.str();
}

}  // namespace wlhn::acceptance

int main(int argc, char** argv) {
  using namespace wlhn::acceptance;
  wlhn::tune_allocator();
  const std::vector<Outcome (*)()> criteria{
      cycle_with_tails_correlation, hierarchy_study,         regression_benchmarks,
      geometry_suite,               distance_order_and_matching_bound,
      construction_invariants,      gradient_integrity,      depth_robustness,
      mutag_sanity};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) which.push_back(i);
  }
  bool all = true;
  for (int n : which) {
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << n << "\n";
      return 1;
    }
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
