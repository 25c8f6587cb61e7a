#pragma once

// Article-normalized co-occurrence matrices.
//
// Every article with at least one present category deposits a total weight of
// exactly 1. With M present categories (binary presence, multiplicity
// ignored), each of the C(M,2) unordered pairs receives 1/C(M,2), stored as
// 0.5/C(M,2) in each of the two symmetric cells. A single-category article
// puts its weight of 1 on the diagonal.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "meshforge/corpus.hpp"
#include "meshforge/ontology.hpp"

namespace meshforge {

class CoocMatrix {
 public:
  CoocMatrix() = default;
  CoocMatrix(int level, std::vector<std::string> labels, YearWindow window);

  int level() const noexcept { return level_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const YearWindow& window() const noexcept { return window_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::uint64_t article_count() const noexcept { return article_count_; }

  double at(std::size_t i, std::size_t j) const noexcept { return weights_[i * labels_.size() + j]; }
  /// Unordered-pair mass: at(i,j) + at(j,i) off the diagonal, at(i,i) on it.
  double pair_weight(std::size_t i, std::size_t j) const noexcept {
    return i == j ? at(i, i) : at(i, j) + at(j, i);
  }
  /// Sum of every stored cell; equals article_count() up to rounding.
  double total_mass() const noexcept;
  /// Row sum excluding the diagonal.
  double off_diagonal_strength(std::size_t i) const noexcept;
  std::span<const double> weights() const noexcept { return weights_; }

  /// Direct construction for fixtures and artifact loading. `weights` is
  /// row-major and must be symmetric and non-negative.
  static CoocMatrix from_weights(int level, std::vector<std::string> labels, YearWindow window,
                                 std::vector<double> weights, std::uint64_t article_count);
  /// Uniformly rescaled copy (article_count unchanged).
  CoocMatrix scaled(double factor) const;

 private:
  friend class CoocAccumulator;

  int level_ = 1;
  std::vector<std::string> labels_;
  YearWindow window_;
  std::vector<double> weights_;
  std::uint64_t article_count_ = 0;
};

/// Contribution of a single article. Throws Error for an all-zero vector.
CoocMatrix article_matrix(const SAVector& sa, std::vector<std::string> labels, YearWindow window = {});

/// Mergeable accumulator. Tallies are exact integers keyed by the number of
/// present categories, so merge order never changes the finished matrix.
class CoocAccumulator {
 public:
  CoocAccumulator() = default;
  CoocAccumulator(int level, std::size_t dimension);

  int level() const noexcept { return level_; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::uint64_t article_count() const noexcept { return articles_; }
  std::uint64_t skipped() const noexcept { return skipped_; }

  /// Returns false (and counts a skip) for an all-zero vector. Throws Error on
  /// level or dimension mismatch.
  bool add(const SAVector& sa);
  /// Fast path: strictly increasing category slots of the present categories.
  bool add_present(std::span<const std::uint16_t> present);
  void merge(const CoocAccumulator& other);

  CoocMatrix finish(std::vector<std::string> labels, YearWindow window) const;

 private:
  std::size_t tri(std::size_t i, std::size_t j) const noexcept {
    return i * dimension_ - i * (i + 1) / 2 + j;
  }

  int level_ = 1;
  std::size_t dimension_ = 0;
  std::uint64_t articles_ = 0;
  std::uint64_t skipped_ = 0;
  std::vector<std::uint64_t> singles_;                         // M = 1, per category
  std::map<std::size_t, std::vector<std::uint64_t>> by_size_;  // M >= 2, upper triangle
};

CoocMatrix accumulate(std::span<const SAVector> articles, int level, std::vector<std::string> labels,
                      YearWindow window);

struct TreeEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0;
};

struct SpanningTree {
  std::vector<TreeEdge> edges;         // in insertion order (descending weight)
  std::vector<std::size_t> isolated;   // labels without off-diagonal weight
  std::size_t components = 0;          // trees in the forest over non-isolated labels
};

/// Maximum-weight spanning tree (the MST under distance 1/weight). Ties are
/// broken by label index. Throws Error for an empty or all-zero matrix.
SpanningTree mst_hierarchy(const CoocMatrix& matrix);

// Exports ------------------------------------------------------------------

/// Full symmetric matrix with a label header row and column.
void write_matrix_csv(std::ostream& out, const CoocMatrix& matrix);
/// Sidecar metadata JSON (level, window, article_count, diagonal convention).
void write_matrix_sidecar(std::ostream& out, const CoocMatrix& matrix);
/// Unordered-pair view: `label_a<TAB>label_b<TAB>weight`, non-zero pairs only.
void write_edge_list_tsv(std::ostream& out, const CoocMatrix& matrix);
/// Lossless JSON artifact used between pipeline stages.
std::string matrix_to_json(const CoocMatrix& matrix);
CoocMatrix matrix_from_json(std::string_view text);

}  // namespace meshforge
