#include "wlhn/analysis.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace wlhn::analysis {

Metric parse_metric(std::string_view s) {
  if (s == "hyperbolic") return Metric::kHyperbolic;
  if (s == "euclidean") return Metric::kEuclidean;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

std::string_view to_string(Metric m) { return m == Metric::kHyperbolic ? "hyperbolic" : "euclidean"; }

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double row_distance(const RowMatrix& p, Eigen::Index i, Eigen::Index j, Metric metric) {
  if (metric == Metric::kEuclidean) return (p.row(i) - p.row(j)).norm();
  if (i == j) return 0.0;
  const double diff = (p.row(i) - p.row(j)).squaredNorm();
  const double denom = (1.0 - p.row(i).squaredNorm()) * (1.0 - p.row(j).squaredNorm());
  return 2.0 * std::asinh(std::sqrt(diff / denom));
}

DistanceStudy correlation_study(const wl::ColorHierarchy& h, const RowMatrix& emb, Metric metric,
                                const StudyOptions& options) {
  std::vector<int> ids(h.size());
  std::iota(ids.begin(), ids.end(), 0);
  return correlation_study(h, ids, emb, metric, options);
}

DistanceStudy correlation_study(const wl::ColorHierarchy& h, std::span<const int> ids,
                                const RowMatrix& emb, Metric metric, const StudyOptions& options) {
  const auto n = static_cast<int>(ids.size());
  if (emb.rows() != n) {
    throw std::invalid_argument("correlation_study: " + std::to_string(emb.rows()) +
                                " embedding rows for " + std::to_string(n) + " hierarchy nodes");
  }
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(h.size())) {
      throw std::invalid_argument("correlation_study: unknown hierarchy node " + std::to_string(id));
    }
  }
  DistanceStudy s;
  s.metric = metric;
  s.n_nodes = static_cast<std::size_t>(n);
  std::vector<std::pair<int, int>> rows;
  if (s.n_nodes <= options.max_exact_nodes) {
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) rows.emplace_back(a, b);
    }
  } else {
    s.sampled = true;
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<int> pick(0, n - 1);
    while (rows.size() < options.sample_pairs) {
      const int a = pick(rng), b = pick(rng);
      if (a != b) rows.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  s.pairs.reserve(rows.size());
  s.tree_distance.reserve(rows.size());
  s.embedding_distance.reserve(rows.size());
  for (auto [a, b] : rows) {
    const int ia = ids[static_cast<std::size_t>(a)], ib = ids[static_cast<std::size_t>(b)];
    s.pairs.emplace_back(ia, ib);
    s.tree_distance.push_back(wl::wl_distance(h, ia, ib));
    s.embedding_distance.push_back(row_distance(emb, a, b, metric));
  }
  s.correlation = pearson(s.tree_distance, s.embedding_distance);
  return s;
}

RowMatrix distance_matrix(const RowMatrix& p, Metric metric) {
  const Eigen::Index n = p.rows();
  RowMatrix m = RowMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = m(j, i) = row_distance(p, i, j, metric);
  }
  return m;
}

void write_matrix_csv(std::ostream& out, const RowMatrix& m, std::span<const int> ids) {
  if (static_cast<Eigen::Index>(ids.size()) != m.rows()) throw std::invalid_argument("write_matrix_csv: id count");
  out.precision(17);
  out << "id";
  for (int id : ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
    out << '\n';
  }
}

void write_scatter_csv(std::ostream& out, const DistanceStudy& s) {
  out.precision(17);
  out << "a,b,tree_distance,embedding_distance\n";
  for (std::size_t k = 0; k < s.pairs.size(); ++k) {
    out << s.pairs[k].first << ',' << s.pairs[k].second << ',' << s.tree_distance[k] << ','
        << s.embedding_distance[k] << '\n';
  }
}

nlohmann::json report_json(const DistanceStudy& s, const std::string& scatter_csv,
                           const std::string& matrix_csv) {
  nlohmann::json j;
  j["metric"] = std::string(to_string(s.metric));
  j["correlation"] = s.correlation ? nlohmann::json(*s.correlation) : nlohmann::json(nullptr);
  j["n_nodes"] = s.n_nodes;
  j["n_pairs"] = s.pairs.size();
  j["sampled"] = s.sampled;
  j["scatter_csv"] = scatter_csv;
  j["matrix_csv"] = matrix_csv;
  return j;
}

MatchingBound matching_bound_check(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matching_bound_check: shape mismatch");
  if (a.rows() > 8) throw std::invalid_argument("matching_bound_check: at most 8 rows");
  MatchingBound r;
  r.lhs = (a.colwise().sum() - b.colwise().sum()).norm();
  std::vector<int> perm(static_cast<std::size_t>(a.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  r.rhs = a.rows() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) cost += (a.row(i) - b.row(perm[static_cast<std::size_t>(i)])).norm();
    r.rhs = std::min(r.rhs, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

}  // namespace wlhn::analysis
