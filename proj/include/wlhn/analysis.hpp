#pragma once

// Distance studies between embeddings and the WL tree metric.

#include "wlhn/graph.hpp"
#include "wlhn/wlcolor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wlhn::analysis {

enum class Metric { kHyperbolic, kEuclidean };

Metric parse_metric(std::string_view s);
std::string_view to_string(Metric m);

/// Sample correlation; nullopt when either side has zero variance or
/// fewer than two entries.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Distance between rows i and j of `points` (Poincare-ball distance for
/// kHyperbolic, Euclidean norm otherwise).
double row_distance(const RowMatrix& points, Eigen::Index i, Eigen::Index j, Metric metric);

struct DistanceStudy {
  Metric metric = Metric::kHyperbolic;
  std::size_t n_nodes = 0;
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> tree_distance;
  std::vector<double> embedding_distance;
  std::optional<double> correlation;
  bool sampled = false;
};

struct StudyOptions {
  std::size_t max_exact_nodes = 4000;
  std::size_t sample_pairs = 100000;
  std::uint64_t seed = 0;
};

/// `embeddings` has one row per hierarchy node, in hierarchy id order.
/// All unordered pairs of distinct nodes are used up to
/// options.max_exact_nodes nodes; above that, options.sample_pairs pairs
/// are drawn uniformly with replacement.
DistanceStudy correlation_study(const wl::ColorHierarchy& h, const RowMatrix& embeddings,
                                Metric metric, const StudyOptions& options = {});
/// Study restricted to the hierarchy nodes `ids`; row k of `embeddings`
/// belongs to ids[k]. Pairs are reported by hierarchy id.
DistanceStudy correlation_study(const wl::ColorHierarchy& h, std::span<const int> ids,
                                const RowMatrix& embeddings, Metric metric,
                                const StudyOptions& options = {});

RowMatrix distance_matrix(const RowMatrix& points, Metric metric);

/// Header row "id,<ids...>", then one row per point.
void write_matrix_csv(std::ostream& out, const RowMatrix& m, std::span<const int> ids);
/// Columns a,b,tree_distance,embedding_distance.
void write_scatter_csv(std::ostream& out, const DistanceStudy& s);

nlohmann::json report_json(const DistanceStudy& s, const std::string& scatter_csv,
                           const std::string& matrix_csv);

struct MatchingBound {
  double lhs = 0.0;  // |sum a - sum b|
  double rhs = 0.0;  // cheapest one-to-one pairing cost
  bool holds = true;
};

/// Brute force over all pairings of the rows of a and b (at most 8 rows).
MatchingBound matching_bound_check(const RowMatrix& a, const RowMatrix& b);

}  // namespace wlhn::analysis
