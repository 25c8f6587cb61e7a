#pragma once

// Modularity clustering of co-occurrence networks, cluster-size series, stable
// cliques (the common refinement of all yearly partitions) and clique-based
// cluster continuity.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "meshforge/cooccur.hpp"

namespace meshforge {

enum class DiagonalMode {
  kSelfLoop,  // diagonal mass is a self-loop: counts toward degree and internal mass
  kIgnore,    // diagonal dropped entirely
};

struct LouvainOptions {
  std::uint64_t seed = 42;
  double resolution = 1.0;
  DiagonalMode diagonal = DiagonalMode::kSelfLoop;
  double min_gain = 1e-12;
  int max_passes = 1000;
};

/// A partition of a matrix's labels. Nodes without any weight are excluded
/// (assignment -1). Cluster ids are canonical: descending internal mass, then
/// smallest member index.
struct Clustering {
  std::vector<std::string> labels;
  YearWindow window;
  std::vector<int> assignment;
  std::vector<std::size_t> cluster_sizes;
  double modularity = 0;
  std::uint64_t seed = 0;
  double resolution = 1.0;

  std::size_t cluster_count() const noexcept { return cluster_sizes.size(); }
  bool present(std::size_t node) const noexcept { return assignment[node] >= 0; }
  std::vector<std::size_t> members(int cluster) const;
  std::vector<std::size_t> excluded() const;
};

/// Weighted modularity of `assignment` on `matrix`, evaluated directly from
/// the matrix cells. Nodes with assignment -1 are left out of the network.
double modularity(const CoocMatrix& matrix, std::span<const int> assignment, double resolution = 1.0,
                  DiagonalMode diagonal = DiagonalMode::kSelfLoop);

/// Builds a canonical Clustering from an arbitrary assignment (ids renumbered).
Clustering make_clustering(const CoocMatrix& matrix, std::vector<int> assignment, const LouvainOptions& options);

/// Louvain local moving + aggregation with a seeded node visit order, followed
/// by single-node refinement on the original graph. Throws Error when the
/// matrix has no weight.
Clustering louvain(const CoocMatrix& matrix, const LouvainOptions& options = {});

struct ClusterSizeRow {
  int year = 0;
  int cluster = 0;
  std::size_t size = 0;
};
std::vector<ClusterSizeRow> cluster_size_series(std::span<const Clustering> annual);

/// Disjoint label sets that share a cluster in every analyzed year. A node
/// absent from any year's network cannot share a clique and stays a singleton.
class CliqueCatalog {
 public:
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::vector<std::size_t>>& cliques() const noexcept { return cliques_; }
  int clique_of(std::size_t node) const { return clique_of_.at(node); }
  std::size_t size() const noexcept { return cliques_.size(); }

  /// Q_{m,t}: ids of the cliques with members in m's cluster of `clustering`.
  /// Empty when m is absent from that year.
  std::set<int> surrounding(const Clustering& clustering, std::size_t node) const;

 private:
  friend CliqueCatalog stable_cliques(std::span<const Clustering> annual);

  std::vector<std::string> labels_;
  std::vector<std::vector<std::size_t>> cliques_;
  std::vector<int> clique_of_;
};

/// Throws Error on empty input or inconsistent label bases.
CliqueCatalog stable_cliques(std::span<const Clustering> annual);

/// 1 - |a n b| / |a u b|; 0 when both are empty.
double jaccard_distance(const std::set<int>& a, const std::set<int>& b);

/// Jaccard distance between the clique-label sets around `node` in two
/// consecutive clusterings; nullopt when the node is absent in either.
std::optional<double> continuity(const CliqueCatalog& cliques, const Clustering& before, const Clustering& after,
                                 std::size_t node);

struct ContinuityRow {
  int year = 0;  // year of the later clustering
  std::string node;
  double delta_j = 0;
};

struct ContinuityBins {
  int year = 0;
  std::size_t zero = 0;     // delta_j == 0
  std::size_t partial = 0;  // 0 < delta_j < 1
  std::size_t full = 0;     // delta_j == 1
};

struct ContinuityReport {
  std::vector<ContinuityRow> rows;
  std::vector<ContinuityBins> histogram;
  std::size_t skipped = 0;
};

/// Continuity of every node over each consecutive pair of clusterings.
ContinuityReport continuity_series(const CliqueCatalog& cliques, std::span<const Clustering> annual);

// Exports ------------------------------------------------------------------

std::string clustering_to_json(const Clustering& clustering);
Clustering clustering_from_json(std::string_view text);
void write_cluster_sizes_csv(std::ostream& out, std::span<const ClusterSizeRow> rows);
std::string cliques_to_json(const CliqueCatalog& cliques);
void write_continuity_csv(std::ostream& out, const ContinuityReport& report);
void write_continuity_histogram_csv(std::ostream& out, const ContinuityReport& report);

}  // namespace meshforge
