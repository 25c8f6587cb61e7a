#pragma once

// Per-article categorical diversity, convergence fractions, team-size groups,
// grouped statistics and cubic trend fits.
//
// Diversity of a count vector c (n = sum c): the upper triangle (with
// diagonal) of c (x) c, normalized to unit total, has trace sum(c_i^2) /
// ((n^2 + sum c_i^2) / 2); the diversity is one minus that trace, i.e.
// (n^2 - sum c_i^2) / (n^2 + sum c_i^2). It lies in [0, (d-1)/(d+1)].

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshforge/ontology.hpp"
#include "meshforge/stats.hpp"

namespace meshforge {

/// Matrix route: builds the normalized upper-triangular outer product and
/// returns 1 - trace. nullopt for an all-zero vector.
std::optional<double> diversity_matrix(std::span<const std::uint32_t> counts);
/// Closed form (n^2 - sum c^2) / (n^2 + sum c^2). nullopt for an all-zero vector.
std::optional<double> diversity_closed_form(std::span<const std::uint32_t> counts);
inline std::optional<double> f_d(const SAVector& sa) { return diversity_closed_form(sa.counts); }
/// Upper bound (d-1)/(d+1) for a d-dimensional vector.
constexpr double diversity_bound(std::size_t d) { return (static_cast<double>(d) - 1) / (static_cast<double>(d) + 1); }

enum class ConvergenceMode { kJ, kL, kJL };

struct ConvergenceThresholds {
  double core_min = 0.5;   // share in A, B, C, D, E, G
  double flag_min = 0.25;  // share in J, L or J+L
  /// J+L mode only: require J and L to each reach flag_min, instead of the
  /// combined share with both present.
  bool strict_jl = false;
};

/// Convergence flag on a level-1 vector whose labels are branch letters.
/// Shares are over the vector's locator-count total; false for an empty vector.
bool f_x(const SAVector& sa1, std::span<const std::string> labels, ConvergenceMode mode,
         const ConvergenceThresholds& thresholds = {});

struct YearFraction {
  int year = 0;
  std::uint64_t flagged = 0;
  std::uint64_t total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(total); }
};

/// Mergeable per-year flagged/total counter.
class FractionCounter {
 public:
  void add(int year, bool flagged);
  void merge(const FractionCounter& other);
  /// Years with zero articles are omitted.
  std::vector<YearFraction> series() const;

 private:
  std::map<int, std::pair<std::uint64_t, std::uint64_t>> counts_;
};

std::vector<YearFraction> yearly_fraction(std::span<const std::pair<int, bool>> flags);

enum class TeamGroup { kSolo, kSmall, kMedium, kLarge, kUnknown };

/// 1 solo; 2-5 small; 6-10 medium; 11-50 large; 0 or above 50 unknown.
TeamGroup team_group(int author_count) noexcept;
const char* to_string(TeamGroup group) noexcept;

struct DiversityRecord {
  std::string pmid;
  int year = 0;
  std::string journal;
  TeamGroup team = TeamGroup::kUnknown;
  double f_d = 0;
  int level = 2;
};

/// Cubic trend a + b t' + c t'^2 + d t'^3 with t' = year - center.
struct TrendFit {
  double center = 1990;
  double a = 0, b = 0, c = 0, d = 0;
  double residual_variance = 0;
  std::size_t points = 0;
  PolynomialFit fit;

  double evaluate(double year) const { return fit.evaluate(year); }
  /// Half-width of the two-sided band at `level` (default 99%).
  double band(double year, double level = 0.99) const { return fit.band_half_width(year, level); }
};

/// Throws Error for fewer than four points.
TrendFit trend_fit(std::span<const std::pair<int, double>> series, double center = 1990);

/// Mergeable running statistics plus a histogram with a dedicated f_d == 0 bin.
struct GroupStats {
  std::uint64_t count = 0;
  double sum = 0;
  double sum_sq = 0;
  std::uint64_t zeros = 0;
  std::vector<std::uint64_t> bins;  // (0, 1) split into equal-width bins

  void add(double value, std::size_t bin_count);
  void merge(const GroupStats& other);
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
  /// Population standard deviation.
  double stddev() const;
};

enum class AggregateKey { kYear, kJournal, kTeamYear };

/// Grouping key: `year` is the window start (or 0 for journal keys), `team`
/// is set for team-year keys, `journal` for journal keys.
struct GroupKey {
  int year = 0;
  std::string journal;
  std::optional<TeamGroup> team;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

class DiversityAggregator {
 public:
  DiversityAggregator(AggregateKey key, int window_years = 1, int anchor_year = 1970, std::size_t bins = 20);

  void add(const DiversityRecord& record);
  void merge(const DiversityAggregator& other);

  AggregateKey key() const noexcept { return key_; }
  int window_years() const noexcept { return window_; }
  std::size_t bin_count() const noexcept { return bins_; }
  const std::map<GroupKey, GroupStats>& groups() const noexcept { return groups_; }
  int window_start(int year) const;

 private:
  AggregateKey key_;
  int window_;
  int anchor_;
  std::size_t bins_;
  std::map<GroupKey, GroupStats> groups_;
};

struct JournalRank {
  std::string journal;
  double mean_f_d = 0;
  std::uint64_t article_count = 0;
};

/// Sorted by mean f_d descending, then journal name. Journals with fewer than
/// `min_articles` are dropped.
std::vector<JournalRank> journal_ranking(const DiversityAggregator& by_journal, std::uint64_t min_articles = 1);

// Exports ------------------------------------------------------------------

void write_diversity_header(std::ostream& out);
void write_diversity_row(std::ostream& out, const DiversityRecord& record);
void write_group_stats_csv(std::ostream& out, const DiversityAggregator& aggregator);
void write_histogram_csv(std::ostream& out, const DiversityAggregator& aggregator);
void write_journal_ranking_csv(std::ostream& out, std::span<const JournalRank> ranking);
void write_fraction_csv(std::ostream& out, const std::map<std::string, std::vector<YearFraction>>& series);
std::string trend_to_json(const std::map<std::string, TrendFit>& fits);
void write_trend_csv(std::ostream& out, const std::map<std::string, TrendFit>& fits,
                     const std::map<std::string, std::vector<std::pair<int, double>>>& observed);

}  // namespace meshforge
