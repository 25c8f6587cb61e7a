#include "meshforge/cooccur.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "format.hpp"
#include "json.hpp"
#include "meshforge/error.hpp"

namespace meshforge {

CoocMatrix::CoocMatrix(int level, std::vector<std::string> labels, YearWindow window)
    : level_(level), labels_(std::move(labels)), window_(window), weights_(labels_.size() * labels_.size(), 0.0) {}

double CoocMatrix::total_mass() const noexcept { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

double CoocMatrix::off_diagonal_strength(std::size_t i) const noexcept {
  double s = 0;
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != i) s += at(i, j);
  }
  return s;
}

CoocMatrix CoocMatrix::from_weights(int level, std::vector<std::string> labels, YearWindow window,
                                    std::vector<double> weights, std::uint64_t article_count) {
  const auto n = labels.size();
  if (weights.size() != n * n) throw Error("matrix weights do not match label count");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (weights[i * n + j] < 0) throw Error("negative co-occurrence weight");
      if (weights[i * n + j] != weights[j * n + i]) throw Error("co-occurrence weights are not symmetric");
    }
  }
  CoocMatrix m(level, std::move(labels), window);
  m.weights_ = std::move(weights);
  m.article_count_ = article_count;
  return m;
}

CoocMatrix CoocMatrix::scaled(double factor) const {
  CoocMatrix m = *this;
  for (auto& w : m.weights_) w *= factor;
  return m;
}

CoocMatrix article_matrix(const SAVector& sa, std::vector<std::string> labels, YearWindow window) {
  CoocAccumulator acc(sa.level, sa.counts.size());
  if (!acc.add(sa)) throw Error("article has no present category");
  return acc.finish(std::move(labels), window);
}

CoocAccumulator::CoocAccumulator(int level, std::size_t dimension)
    : level_(level), dimension_(dimension), singles_(dimension, 0) {}

bool CoocAccumulator::add(const SAVector& sa) {
  if (sa.level != level_) throw Error("co-occurrence level mismatch");
  if (sa.counts.size() != dimension_) throw Error("co-occurrence dimension mismatch");
  std::vector<std::uint16_t> present;
  for (std::size_t i = 0; i < sa.counts.size(); ++i) {
    if (sa.counts[i] != 0) present.push_back(static_cast<std::uint16_t>(i));
  }
  return add_present(present);
}

bool CoocAccumulator::add_present(std::span<const std::uint16_t> present) {
  if (present.empty()) {
    ++skipped_;
    return false;
  }
  ++articles_;
  if (present.size() == 1) {
    ++singles_[present.front()];
    return true;
  }
  auto& tally = by_size_[present.size()];
  if (tally.empty()) tally.assign(dimension_ * (dimension_ + 1) / 2, 0);
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) ++tally[tri(present[a], present[b])];
  }
  return true;
}

void CoocAccumulator::merge(const CoocAccumulator& other) {
  if (other.level_ != level_ || other.dimension_ != dimension_) throw Error("cannot merge accumulators of different shape");
  articles_ += other.articles_;
  skipped_ += other.skipped_;
  for (std::size_t i = 0; i < dimension_; ++i) singles_[i] += other.singles_[i];
  for (const auto& [m, tally] : other.by_size_) {
    auto& mine = by_size_[m];
    if (mine.empty()) {
      mine = tally;
    } else {
      for (std::size_t k = 0; k < tally.size(); ++k) mine[k] += tally[k];
    }
  }
}

CoocMatrix CoocAccumulator::finish(std::vector<std::string> labels, YearWindow window) const {
  if (labels.size() != dimension_) throw Error("label count does not match accumulator dimension");
  CoocMatrix out(level_, std::move(labels), window);
  out.article_count_ = articles_;
  const auto n = dimension_;
  for (std::size_t i = 0; i < n; ++i) out.weights_[i * n + i] = static_cast<double>(singles_[i]);
  // Ascending M keeps the floating-point summation order fixed.
  for (const auto& [m, tally] : by_size_) {
    const double half_share = 0.5 / (static_cast<double>(m) * static_cast<double>(m - 1) / 2.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto c = tally[tri(i, j)];
        if (c == 0) continue;
        const double w = static_cast<double>(c) * half_share;
        out.weights_[i * n + j] += w;
        out.weights_[j * n + i] += w;
      }
    }
  }
  return out;
}

CoocMatrix accumulate(std::span<const SAVector> articles, int level, std::vector<std::string> labels,
                      YearWindow window) {
  CoocAccumulator acc(level, labels.size());
  for (const auto& sa : articles) acc.add(sa);
  return acc.finish(std::move(labels), window);
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

}  // namespace

SpanningTree mst_hierarchy(const CoocMatrix& matrix) {
  const auto n = matrix.size();
  if (n == 0) throw Error("cannot build a spanning tree of an empty matrix");
  std::vector<TreeEdge> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = matrix.pair_weight(i, j);
      if (w > 0) candidates.push_back({i, j, w});
    }
  }
  if (candidates.empty()) throw Error("matrix has no off-diagonal weight");
  std::stable_sort(candidates.begin(), candidates.end(), [](const TreeEdge& x, const TreeEdge& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  SpanningTree tree;
  DisjointSets sets(n);
  std::vector<bool> touched(n, false);
  for (const auto& e : candidates) {
    touched[e.a] = touched[e.b] = true;
    if (sets.unite(e.a, e.b)) tree.edges.push_back(e);
  }
  std::size_t active = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (touched[i]) {
      ++active;
    } else {
      tree.isolated.push_back(i);
    }
  }
  tree.components = active - tree.edges.size();
  return tree;
}

void write_matrix_csv(std::ostream& out, const CoocMatrix& matrix) {
  detail::write_schema_line(out, "matrix-csv");
  out << "label";
  for (const auto& l : matrix.labels()) out << ',' << detail::csv_field(l);
  out << '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << detail::csv_field(matrix.labels()[i]);
    for (std::size_t j = 0; j < matrix.size(); ++j) out << ',' << detail::num(matrix.at(i, j));
    out << '\n';
  }
}

void write_matrix_sidecar(std::ostream& out, const CoocMatrix& matrix) {
  nlohmann::ordered_json meta;
  meta["schema"] = detail::schema_id("matrix-meta");
  meta["level"] = matrix.level();
  meta["window"] = {matrix.window().first, matrix.window().last};
  meta["article_count"] = matrix.article_count();
  meta["total_mass"] = matrix.total_mass();
  meta["diagonal"] = "single-category articles deposit weight 1 on the diagonal";
  meta["off_diagonal"] = "pair mass split equally across both symmetric cells";
  out << meta.dump(2) << '\n';
}

void write_edge_list_tsv(std::ostream& out, const CoocMatrix& matrix) {
  detail::write_schema_line(out, "edge-list");
  out << "label_a\tlabel_b\tweight\n";
  const auto& labels = matrix.labels();
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    for (std::size_t j = i; j < matrix.size(); ++j) {
      const double w = matrix.pair_weight(i, j);
      if (w > 0) out << labels[i] << '\t' << labels[j] << '\t' << detail::num(w) << '\n';
    }
  }
}

std::string matrix_to_json(const CoocMatrix& matrix) {
  nlohmann::ordered_json j;
  j["schema"] = detail::schema_id("matrix");
  j["level"] = matrix.level();
  j["window"] = {matrix.window().first, matrix.window().last};
  j["article_count"] = matrix.article_count();
  j["labels"] = matrix.labels();
  j["weights"] = std::vector<double>(matrix.weights().begin(), matrix.weights().end());
  return j.dump();
}

CoocMatrix matrix_from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("matrix artifact", "invalid JSON");
  try {
    const auto window = j.at("window");
    return CoocMatrix::from_weights(j.at("level").get<int>(), j.at("labels").get<std::vector<std::string>>(),
                                    {window.at(0).get<int>(), window.at(1).get<int>()},
                                    j.at("weights").get<std::vector<double>>(),
                                    j.at("article_count").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("matrix artifact", e.what());
  }
}

}  // namespace meshforge
