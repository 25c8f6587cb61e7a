#pragma once

// Cross-cluster bridge scores.
//
// For node i in cluster I:  beta_i = sum over clusters J != I of W_iJ / W_IJ,
// where W_iJ is the weight from i to members of J and W_IJ the total weight
// between the two clusters. Cluster pairs without any connecting weight
// contribute nothing. Weights are the unordered-pair masses of the matrix.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "meshforge/clusters.hpp"
#include "meshforge/cooccur.hpp"

namespace meshforge {

enum class RankScope {
  kWithinCluster,  // rank 1..|C_I| inside each cluster; R = rank / |C_I|
  kGlobal,         // rank 1..N over all clustered nodes; R = rank / N
};

struct BridgeScores {
  int year = 0;
  std::vector<std::string> labels;
  std::vector<double> beta;        // 0 for excluded nodes
  std::vector<int> rank;           // 0 for excluded nodes
  std::vector<double> norm_rank;   // 0 for excluded nodes
  std::vector<int> cluster;        // -1 for excluded nodes
  std::vector<std::size_t> cluster_size;
  bool single_cluster = false;     // every beta is 0 by construction
};

/// Scores only; ranks are filled by normalized_ranks(). Throws Error when the
/// clustering is empty or does not match the matrix.
BridgeScores bridge_scores(const CoocMatrix& matrix, const Clustering& clustering);

/// Ranks by descending beta (ties by label index) and fills rank/norm_rank.
void normalized_ranks(BridgeScores& scores, const Clustering& clustering,
                      RankScope scope = RankScope::kWithinCluster);

struct BridgePoint {
  int year = 0;
  double beta = 0;
  int rank = 0;
  double norm_rank = 0;
  int cluster = -1;
  std::size_t cluster_size = 0;
};

/// Per-node yearly series; years strictly increasing.
using BridgeSeries = std::map<std::string, std::vector<BridgePoint>>;

/// Assembles series from yearly scores (must be in increasing year order).
BridgeSeries assemble_series(std::span<const BridgeScores> yearly);

/// Centered moving average of norm_rank (plot smoothing only).
std::vector<double> moving_average(std::span<const BridgePoint> series, std::size_t width = 5);

enum class TrendTarget { kRawRank, kNormalizedRank };

struct EmergingCriteria {
  double max_mean_rank = 20;     // on average within the top-20 of its own cluster
  double min_coverage = 0.5;     // series at least half as long as the span
  double max_p_value = 0.01;
  double min_abs_slope = 0.1;
  TrendTarget target = TrendTarget::kRawRank;
  int span_first = 1970;
  int span_last = 2018;
};

enum class TrendDirection {
  kRising,     // rank number decreasing: growing bridge prominence
  kDeclining,  // rank number increasing
};

struct EmergingBridge {
  std::string node;
  double slope = 0;
  double intercept = 0;
  double p_value = 1;
  std::size_t years_covered = 0;
  double mean_rank = 0;
  TrendDirection direction = TrendDirection::kRising;
};

/// Nodes meeting all four criteria, sorted by label. Series with fewer than
/// three points cannot be tested and are skipped.
std::vector<EmergingBridge> detect_emerging(const BridgeSeries& series, const EmergingCriteria& criteria = {});

struct EgoNeighbor {
  std::size_t node = 0;
  double weight = 0;  // pair weight to the ego node
  int cluster = -1;
};

struct EgoNetwork {
  std::size_t ego = 0;
  int ego_cluster = -1;
  std::vector<EgoNeighbor> neighbors;  // descending weight, ties by label index
  /// Pair weights among neighbors, indexed [a * k + b] in neighbor order.
  std::vector<double> neighbor_weights;
};

/// Top-k co-occurring neighbors (non-zero weight only). Throws LookupError for
/// an unknown node label.
EgoNetwork ego_subnetwork(const CoocMatrix& matrix, const Clustering& clustering, std::string_view node,
                          std::size_t k = 10);

// Exports ------------------------------------------------------------------

void write_bridge_series_csv(std::ostream& out, const BridgeSeries& series);
std::string emerging_to_json(std::span<const EmergingBridge> bridges, const EmergingCriteria& criteria);
/// Node-link JSON for plotting tools.
std::string ego_to_json(const EgoNetwork& ego, const CoocMatrix& matrix);

}  // namespace meshforge
