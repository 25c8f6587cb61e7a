#pragma once

// Synthetic corpora with planted ground truth: block-structured co-occurrence,
// bridge nodes with scheduled cross-block growth, and per-journal diversity
// targets.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "meshforge/corpus.hpp"
#include "meshforge/ontology.hpp"

namespace meshforge {

struct PlantedBridge {
  std::string label;        // L2 heading; must belong to a block
  double rate_start = 0.0;  // probability that a foreign-block article includes it
  double rate_end = 0.1;    // linear schedule over the year span
};

struct PlantedJournal {
  std::string name;
  double target_f_d = 0.3;  // mean level-2 diversity at the trend center year
  double weight = 1.0;
};

struct PlantedSpec {
  int first_year = 1970;
  int last_year = 2018;
  std::size_t articles_per_year = 1000;
  /// Either explicit L2 blocks, or generated as block_count x block_size.
  std::vector<std::vector<std::string>> blocks;
  std::size_t block_count = 3;
  std::size_t block_size = 12;
  double within_rate = 0.85;       // new category drawn from the home block
  double popularity_decay = 0.85;  // geometric popularity of headings within a block
  std::vector<PlantedBridge> bridges;
  std::vector<PlantedJournal> journals;
  double major_mean = 4.0;  // mean major descriptors per article (at least 1)
  double minor_mean = 4.0;  // mean additional minor descriptors
  /// Weights for solo, small, medium, large and unknown team sizes.
  std::array<double, 5> team_weights{0.08, 0.52, 0.28, 0.10, 0.02};
  /// Additive change per year of the probability that a new descriptor opens a
  /// new category; plants a diversity trend centered on `trend_center`.
  double diversity_trend = 0.0;
  int trend_center = 1990;
  std::size_t descriptors_per_heading = 3;
  std::uint64_t seed = 42;

  /// Throws ConfigError on rates outside [0,1], unknown bridge labels or
  /// infeasible diversity targets.
  void validate() const;
  // explicit blocks, or generated heading codes when none are given
  std::vector<std::vector<std::string>> resolved_blocks() const;
};

PlantedSpec spec_from_json(std::string_view text);
std::string spec_to_json(const PlantedSpec& spec);

class SyntheticCorpus {
 public:
  explicit SyntheticCorpus(PlantedSpec spec);

  const PlantedSpec& spec() const noexcept { return spec_; }
  const std::vector<std::vector<std::string>>& blocks() const noexcept { return blocks_; }
  const std::vector<std::string>& headings() const noexcept { return headings_; }
  /// Calibrated new-category probability per journal.
  const std::vector<double>& journal_mixing() const noexcept { return mixing_; }

  void write_ontology_tsv(std::ostream& out) const;
  OntologyTree ontology() const;

  /// Emits articles year by year; deterministic for a given spec.
  void generate(const RecordSink& sink) const;
  void generate_year(int year, const RecordSink& sink) const;

  std::string ground_truth_json() const;

 private:
  struct Heading {
    std::size_t block = 0;
    double popularity = 1.0;
    bool bridge = false;
  };

  std::vector<std::size_t> draw_categories(std::uint64_t& state, std::size_t home, double mixing,
                                           std::size_t count, bool allow_bridges) const;
  double simulate_mean_diversity(double mixing, std::uint64_t seed, std::size_t samples) const;

  PlantedSpec spec_;
  std::vector<std::vector<std::string>> blocks_;
  std::vector<std::string> headings_;
  std::vector<Heading> info_;
  std::vector<std::vector<std::size_t>> block_members_;
  std::vector<double> mixing_;
  std::vector<std::size_t> bridge_heading_;
};

struct GeneratedFiles {
  std::filesystem::path corpus;
  std::filesystem::path ontology;
  std::filesystem::path ground_truth;
  std::uint64_t articles = 0;
};

GeneratedFiles generate_files(const PlantedSpec& spec, const std::filesystem::path& out_dir);

}  // namespace meshforge
