#pragma once

// End-to-end orchestration: configuration, a single sharded pass over the
// corpus, content-addressed stage cache, exports and the run manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "meshforge/bridges.hpp"
#include "meshforge/clusters.hpp"
#include "meshforge/corpus.hpp"
#include "meshforge/diversity.hpp"

namespace meshforge {

struct PipelineConfig {
  std::vector<std::filesystem::path> corpus;
  std::filesystem::path ontology;
  std::string branches{kDefaultBranches};
  YearRange years;
  IngestOptions ingest;
  UnresolvedPolicy unresolved = UnresolvedPolicy::kSkip;
  std::uint64_t shard_bytes = 32ull << 20;  // fixed, so shard layout never depends on jobs
  std::vector<YearWindow> periods{{1970, 1989}, {1990, 1999}, {2000, 2009}, {2010, 2018}};

  int cluster_level = 2;
  LouvainOptions louvain;

  RankScope rank_scope = RankScope::kWithinCluster;
  EmergingCriteria emerging;
  std::vector<std::string> ego_nodes;
  std::size_t ego_k = 10;

  int diversity_level = 2;
  int diversity_window = 3;
  std::size_t histogram_bins = 20;
  bool per_article = true;
  double trend_center = 1990;
  ConvergenceThresholds convergence;
  std::uint64_t min_journal_articles = 1;

  // Execution only; never part of the config hash.
  std::filesystem::path out_dir = "meshforge-out";
  std::filesystem::path cache_dir = ".meshforge-cache";
  unsigned jobs = 1;

  /// Relative paths are resolved against `base_dir`. Unknown keys are a
  /// ConfigError.
  static PipelineConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  /// Every setting that can change an output, in a fixed key order.
  std::string canonical_json() const;
  std::string hash() const;
};

enum class Stage { kScan, kCluster, kBridges, kContinuity, kTrend };
const char* to_string(Stage stage) noexcept;

struct StageReport {
  std::string name;
  std::string key;
  bool cache_hit = false;
  bool recovered = false;  // a corrupt cache entry was discarded
  double seconds = 0;
  std::uint64_t files = 0;
};

struct RunReport {
  std::vector<StageReport> stages;
  CorpusStats ingest;
  std::filesystem::path manifest;

  const StageReport* find(std::string_view name) const;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  /// Runs every stage. Exports land in config.out_dir with manifest.json.
  /// While running, out_dir holds an INCOMPLETE marker that is removed on
  /// success. Stage failures surface as StageError; bad input as ParseError.
  RunReport run();
  /// Runs the requested stages plus the stages they depend on.
  RunReport run(std::set<Stage> stages);

  const PipelineConfig& config() const noexcept { return config_; }

 private:
  PipelineConfig config_;
};

/// Row/column order for heat maps: clusters in id order, members by
/// decreasing prevalence (row mass including the diagonal), ties by label
/// index; unclustered labels last.
std::vector<std::size_t> heatmap_order(const CoocMatrix& matrix, const Clustering& clustering);
void write_heatmap_csv(std::ostream& out, const CoocMatrix& matrix, const Clustering& clustering);

/// Figure-ready files from a finished run directory. Throws Error naming the
/// producing command when an artifact is missing.
void export_plotdata(const std::filesystem::path& run_dir, const std::filesystem::path& plot_dir);

}  // namespace meshforge
