#pragma once

// Article ingestion: corpus JSONL reading with Major-MeSH filtering, sharded
// byte-range reads, year windows, and a cached PubMed E-utilities client.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meshforge {

struct MeshRef {
  std::string id;
  bool major = false;

  friend bool operator==(const MeshRef&, const MeshRef&) = default;
};

struct ArticleRecord {
  std::string pmid;
  int year = 0;
  std::string journal;
  int authors = 0;  // 0 = unknown
  std::vector<MeshRef> mesh;
  std::vector<std::string> pub_types;  // empty = not recorded

  friend bool operator==(const ArticleRecord&, const ArticleRecord&) = default;
};

enum class MeshFilter { kMajorOnly, kAll };
enum class ErrorPolicy { kSkip, kFailFast };

struct YearRange {
  int first = 1970;
  int last = 2018;
  bool contains(int year) const noexcept { return year >= first && year <= last; }
};

struct IngestOptions {
  MeshFilter filter = MeshFilter::kMajorOnly;
  YearRange years;
  /// Records whose pub_types intersect this list are kept; records without
  /// pub_types are kept. An empty allowlist disables the check.
  std::vector<std::string> pub_types = {"Journal Article", "Review"};
  ErrorPolicy on_error = ErrorPolicy::kSkip;
};

struct CorpusStats {
  std::uint64_t articles_read = 0;
  std::uint64_t articles_kept = 0;
  std::uint64_t dropped_no_major_mesh = 0;
  std::uint64_t dropped_out_of_range = 0;
  std::uint64_t dropped_pub_type = 0;
  std::uint64_t malformed_lines = 0;
  std::uint64_t unresolved_mesh_refs = 0;

  CorpusStats& operator+=(const CorpusStats& other);
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Parses one corpus JSONL object. Throws std::invalid_argument on schema errors.
ArticleRecord parse_article(std::string_view line);
/// Serializes with a fixed key order so output is byte-stable.
std::string to_jsonl(const ArticleRecord& record);

/// Applies the MeSH filter, year range and publication-type allowlist in place.
/// Returns false (and bumps the matching counter) when the record is dropped.
bool apply_filters(ArticleRecord& record, const IngestOptions& options, CorpusStats& stats);

using RecordSink = std::function<void(ArticleRecord&&)>;

CorpusStats ingest_stream(std::istream& in, const IngestOptions& options, const RecordSink& sink,
                          std::string_view source = "<stream>");
CorpusStats ingest_file(const std::filesystem::path& path, const IngestOptions& options, const RecordSink& sink);

struct ByteRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

/// Splits a file into line-aligned ranges of roughly `target_bytes`. The plan
/// depends only on file content and target size, never on thread count.
std::vector<ByteRange> plan_shards(const std::filesystem::path& path, std::uint64_t target_bytes);
CorpusStats ingest_range(const std::filesystem::path& path, ByteRange range, const IngestOptions& options,
                         const RecordSink& sink);

struct YearWindow {
  int first = 0;
  int last = 0;

  bool contains(int year) const noexcept { return year >= first && year <= last; }
  std::string label() const;
  friend bool operator==(const YearWindow&, const YearWindow&) = default;
};

class WindowSet {
 public:
  WindowSet() = default;
  /// Throws ConfigError when windows overlap or a window is inverted.
  static WindowSet make(std::vector<YearWindow> windows);
  static WindowSet annual(int first, int last);

  std::optional<std::size_t> locate(int year) const noexcept;
  const std::vector<YearWindow>& windows() const noexcept { return windows_; }
  std::size_t size() const noexcept { return windows_.size(); }

 private:
  std::vector<YearWindow> windows_;
};

/// Routes each record to the single window containing its year; the rest are
/// returned in `dropped`.
struct WindowPartition {
  std::vector<std::vector<ArticleRecord>> windows;
  std::size_t dropped = 0;
};
WindowPartition partition_by_window(std::vector<ArticleRecord> records, const WindowSet& windows);

// ---------------------------------------------------------------------------
// Remote retrieval

struct RemoteConfig {
  std::string base_url = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
  std::string api_key_env = "MESHFORGE_API_KEY";
  double rate_per_second = 3.0;
  std::filesystem::path cache_dir = ".meshforge-cache/remote";
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{30};
  std::size_t batch_size = 200;
  std::size_t max_search_results = 10000;
};

/// Spaces request starts at least 1/rate seconds apart.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  std::chrono::steady_clock::duration interval_;
  std::optional<std::chrono::steady_clock::time_point> last_;
};

struct FetchStats {
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
  std::uint64_t records = 0;
  std::uint64_t parse_failures = 0;
};

/// Parses an efetch PubmedArticleSet. Articles that cannot be interpreted are
/// skipped and counted in `parse_failures`.
std::vector<ArticleRecord> parse_pubmed_xml(std::string_view xml, std::uint64_t* parse_failures = nullptr);

class PubMedClient {
 public:
  explicit PubMedClient(RemoteConfig config);

  FetchStats fetch_ids(std::span<const std::string> pmids, const RecordSink& sink);
  /// esearch by publication date, then efetch in batches.
  FetchStats fetch_range(int first_year, int last_year, const RecordSink& sink);

  const RemoteConfig& config() const noexcept { return config_; }

 private:
  std::string get(const std::string& path_and_query, FetchStats& stats);
  std::vector<ArticleRecord> fetch_batch(std::span<const std::string> pmids, FetchStats& stats);

  RemoteConfig config_;
  RateLimiter limiter_;
  std::string api_key_;
};

}  // namespace meshforge
