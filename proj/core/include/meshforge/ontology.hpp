#pragma once

// Descriptor ontology (MeSH-style tree numbers) and the projection of
// descriptors onto first-level branches (L1) and second-level headings (L2).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace meshforge {

/// All sixteen top-level branch letters of the descriptor tree.
inline constexpr std::string_view kAllBranches = "ABCDEFGHIJKLMNVZ";
/// Science branches retained by default (H, I, K, M, V and Z are excluded).
inline constexpr std::string_view kDefaultBranches = "ABCDEFGJLN";

class BranchSet {
 public:
  BranchSet() = default;
  /// Throws ConfigError for letters outside kAllBranches.
  static BranchSet parse(std::string_view letters);
  static BranchSet defaults() { return parse(kDefaultBranches); }

  bool contains(char branch) const noexcept;
  void insert(char branch);
  /// Retained letters in alphabetical order.
  std::string letters() const;
  std::size_t size() const noexcept;

  friend bool operator==(const BranchSet&, const BranchSet&) = default;

 private:
  std::uint32_t bits_ = 0;
};

/// A dotted locator path such as "C18.654.726.500". The first segment is the
/// branch letter followed by a two-digit code; further segments are numeric.
/// A bare branch letter ("C") is accepted as the depth-0 top node.
class TreeNumber {
 public:
  /// Throws std::invalid_argument with a short reason on malformed input.
  static TreeNumber parse(std::string_view text);

  const std::string& str() const noexcept { return path_; }
  char branch() const noexcept { return path_.front(); }
  /// Number of dotted segments; the bare branch letter has depth 0.
  std::size_t depth() const noexcept { return depth_; }
  /// First segment ("C18"); empty for a depth-0 top node.
  std::string_view l2_code() const noexcept;

  friend bool operator==(const TreeNumber& a, const TreeNumber& b) { return a.path_ == b.path_; }

 private:
  std::string path_;
  std::size_t depth_ = 0;
};

struct Descriptor {
  std::string id;
  std::string name;
  std::vector<TreeNumber> tree_numbers;
};

struct OntologyStats {
  std::size_t descriptors_read = 0;
  std::size_t descriptors_kept = 0;
  std::size_t descriptors_dropped = 0;  // every locator outside the branch filter
  std::size_t locators_pruned = 0;
  std::size_t top_node_locators = 0;  // depth-0 locators: L1 only, no L2 heading
};

/// Per-article category counts at level 1 (branches) or 2 (L2 headings).
struct SAVector {
  int level = 1;
  std::vector<std::uint32_t> counts;

  SAVector() = default;
  SAVector(int lvl, std::size_t dimension) : level(lvl), counts(dimension, 0) {}

  std::uint64_t total() const noexcept;
  std::size_t support() const noexcept;  // number of non-zero categories
  bool empty() const noexcept { return support() == 0; }
  SAVector& operator+=(const SAVector& other);
  friend bool operator==(const SAVector&, const SAVector&) = default;
};

/// Immutable once built; safe for concurrent readers.
class OntologyTree {
 public:
  /// Prunes locators outside `filter` and drops descriptors with no surviving
  /// locator. Throws ParseError on duplicate ids.
  static OntologyTree build(std::vector<Descriptor> descriptors, BranchSet filter,
                            std::string_view source = {});

  std::size_t size() const noexcept { return descriptors_.size(); }
  std::span<const Descriptor> descriptors() const noexcept { return descriptors_; }
  const BranchSet& branch_filter() const noexcept { return filter_; }
  const OntologyStats& stats() const noexcept { return stats_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  const Descriptor* find(std::string_view id) const;
  /// Throws LookupError for unknown ids.
  const Descriptor& at(std::string_view id) const;
  /// True when `id` was present in the source but dropped by the branch filter.
  bool was_excluded(std::string_view id) const;

  /// Branch letters as single-character labels ("A", "B", ...).
  const std::vector<std::string>& l1_labels() const noexcept { return l1_labels_; }
  /// Sorted L2 heading codes: the label basis for level-2 vectors.
  const std::vector<std::string>& l2_index() const noexcept { return l2_index_; }
  /// Display name of an L2 heading when the heading itself is a descriptor.
  std::string_view l2_name(std::size_t slot) const;
  const std::vector<std::string>& labels(int level) const;
  std::size_t dimension(int level) const { return labels(level).size(); }

  std::optional<std::size_t> l1_slot(char branch) const;
  std::optional<std::size_t> l2_slot(std::string_view code) const;

  /// Precomputed projection slots per descriptor index; one entry per locator
  /// (repeated slots encode multiplicity).
  std::span<const std::uint16_t> l1_slots(std::size_t descriptor) const;
  std::span<const std::uint16_t> l2_slots(std::size_t descriptor) const;

 private:
  std::vector<Descriptor> descriptors_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_set<std::string> excluded_;
  BranchSet filter_;
  OntologyStats stats_;
  std::vector<std::string> l1_labels_;
  std::vector<std::string> l2_index_;
  std::vector<std::string> l2_names_;
  std::unordered_map<std::string, std::size_t> l2_lookup_;
  std::vector<std::uint32_t> slot_offsets_l1_, slot_offsets_l2_;
  std::vector<std::uint16_t> slots_l1_, slots_l2_;
};

/// `id<TAB>name<TAB>tree;numbers` per line; '#' lines and blank lines ignored.
OntologyTree parse_ontology_tsv(std::istream& in, BranchSet filter, std::string_view source = "<tsv>");
/// NLM descriptor XML (DescriptorRecordSet). Reads DescriptorUI,
/// DescriptorName/String and TreeNumberList; everything else is ignored.
OntologyTree parse_ontology_xml(std::istream& in, BranchSet filter, std::string_view source = "<xml>");
/// Sniffs the format (leading '<' means XML) and parses.
OntologyTree load_ontology(const std::filesystem::path& path, BranchSet filter);
void write_ontology_tsv(std::ostream& out, const OntologyTree& tree);

SAVector project_l1(const OntologyTree& tree, std::string_view id);
SAVector project_l2(const OntologyTree& tree, std::string_view id);

enum class UnresolvedPolicy { kSkip, kError };

struct ProjectionTally {
  std::size_t unresolved = 0;  // unknown to the ontology
  std::size_t excluded = 0;    // known but dropped by the branch filter
};

/// Element-wise sum of per-descriptor projections. Unresolvable ids are
/// skipped and tallied, or raise LookupError under UnresolvedPolicy::kError.
SAVector article_sa(const OntologyTree& tree, std::span<const std::string> ids, int level,
                    UnresolvedPolicy policy = UnresolvedPolicy::kSkip,
                    ProjectionTally* tally = nullptr);

}  // namespace meshforge
