#include "meshforge/bridges.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "format.hpp"
#include "json.hpp"
#include "meshforge/error.hpp"
#include "meshforge/stats.hpp"

namespace meshforge {

BridgeScores bridge_scores(const CoocMatrix& matrix, const Clustering& clustering) {
  const auto n = matrix.size();
  if (clustering.assignment.size() != n) throw Error("clustering does not match matrix");
  if (clustering.cluster_count() == 0) throw Error("bridge scores need a non-empty clustering");
  const auto k = clustering.cluster_count();

  // node_to[i * k + J] = W_iJ
  std::vector<double> node_to(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!clustering.present(i)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !clustering.present(j)) continue;
      node_to[i * k + static_cast<std::size_t>(clustering.assignment[j])] += matrix.pair_weight(i, j);
    }
  }
  // between[I * k + J] = W_IJ
  std::vector<double> between(k * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!clustering.present(i)) continue;
    const auto I = static_cast<std::size_t>(clustering.assignment[i]);
    for (std::size_t J = 0; J < k; ++J) between[I * k + J] += node_to[i * k + J];
  }

  BridgeScores s;
  s.year = clustering.window.first;
  s.labels = matrix.labels();
  s.beta.assign(n, 0.0);
  s.rank.assign(n, 0);
  s.norm_rank.assign(n, 0.0);
  s.cluster = clustering.assignment;
  s.cluster_size.assign(n, 0);
  s.single_cluster = k < 2;
  for (std::size_t i = 0; i < n; ++i) {
    if (!clustering.present(i)) continue;
    const auto I = static_cast<std::size_t>(clustering.assignment[i]);
    s.cluster_size[i] = clustering.cluster_sizes[I];
    double beta = 0;
    for (std::size_t J = 0; J < k; ++J) {
      if (J == I || between[I * k + J] <= 0) continue;
      beta += node_to[i * k + J] / between[I * k + J];
    }
    s.beta[i] = beta;
  }
  return s;
}

void normalized_ranks(BridgeScores& scores, const Clustering& clustering, RankScope scope) {
  const auto n = scores.beta.size();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (clustering.present(i)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.beta[a] != scores.beta[b]) return scores.beta[a] > scores.beta[b];
    return a < b;
  });
  std::vector<int> next(clustering.cluster_count(), 0);
  int global = 0;
  for (auto i : order) {
    const auto c = static_cast<std::size_t>(clustering.assignment[i]);
    if (scope == RankScope::kWithinCluster) {
      scores.rank[i] = ++next[c];
      scores.norm_rank[i] = scores.rank[i] / static_cast<double>(clustering.cluster_sizes[c]);
    } else {
      scores.rank[i] = ++global;
      scores.norm_rank[i] = scores.rank[i] / static_cast<double>(order.size());
    }
  }
}

BridgeSeries assemble_series(std::span<const BridgeScores> yearly) {
  BridgeSeries series;
  int last_year = 0;
  bool first = true;
  for (const auto& s : yearly) {
    if (!first && s.year <= last_year) throw Error("bridge scores must be in increasing year order");
    first = false;
    last_year = s.year;
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      if (s.cluster[i] < 0) continue;
      series[s.labels[i]].push_back({s.year, s.beta[i], s.rank[i], s.norm_rank[i], s.cluster[i], s.cluster_size[i]});
    }
  }
  return series;
}

std::vector<double> moving_average(std::span<const BridgePoint> series, std::size_t width) {
  std::vector<double> out(series.size(), 0.0);
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double sum = 0;
    int count = 0;
    for (auto j = std::max<std::ptrdiff_t>(0, i - half); j <= std::min(n - 1, i + half); ++j) {
      sum += series[static_cast<std::size_t>(j)].norm_rank;
      ++count;
    }
    out[static_cast<std::size_t>(i)] = sum / count;
  }
  return out;
}

std::vector<EmergingBridge> detect_emerging(const BridgeSeries& series, const EmergingCriteria& criteria) {
  const double span_years = criteria.span_last - criteria.span_first + 1;
  std::vector<EmergingBridge> out;
  for (const auto& [node, points] : series) {
    if (points.size() < 3) continue;
    std::vector<double> x, y;
    double rank_sum = 0;
    for (const auto& p : points) {
      x.push_back(p.year);
      y.push_back(criteria.target == TrendTarget::kRawRank ? p.rank : p.norm_rank);
      rank_sum += p.rank;
    }
    const double mean_rank = rank_sum / static_cast<double>(points.size());
    if (mean_rank > criteria.max_mean_rank) continue;                                           // (i)
    if (static_cast<double>(points.size()) < criteria.min_coverage * span_years) continue;      // (ii)
    const auto fit = linear_regression(x, y);
    if (!(fit.p_value < criteria.max_p_value)) continue;                                        // (iii)
    if (!(std::abs(fit.slope) > criteria.min_abs_slope)) continue;                              // (iv)
    out.push_back({node, fit.slope, fit.intercept, fit.p_value, points.size(), mean_rank,
                   fit.slope < 0 ? TrendDirection::kRising : TrendDirection::kDeclining});
  }
  return out;
}

EgoNetwork ego_subnetwork(const CoocMatrix& matrix, const Clustering& clustering, std::string_view node,
                          std::size_t k) {
  const auto& labels = matrix.labels();
  auto it = std::find(labels.begin(), labels.end(), node);
  if (it == labels.end()) throw LookupError("unknown node '" + std::string(node) + "'");
  EgoNetwork ego;
  ego.ego = static_cast<std::size_t>(it - labels.begin());
  ego.ego_cluster = clustering.assignment.at(ego.ego);
  for (std::size_t j = 0; j < matrix.size(); ++j) {
    if (j == ego.ego) continue;
    const double w = matrix.pair_weight(ego.ego, j);
    if (w > 0) ego.neighbors.push_back({j, w, clustering.assignment.at(j)});
  }
  std::stable_sort(ego.neighbors.begin(), ego.neighbors.end(), [](const EgoNeighbor& a, const EgoNeighbor& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.node < b.node;
  });
  if (ego.neighbors.size() > k) ego.neighbors.resize(k);
  const auto m = ego.neighbors.size();
  ego.neighbor_weights.assign(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a != b) ego.neighbor_weights[a * m + b] = matrix.pair_weight(ego.neighbors[a].node, ego.neighbors[b].node);
    }
  }
  return ego;
}

void write_bridge_series_csv(std::ostream& out, const BridgeSeries& series) {
  detail::write_schema_line(out, "bridge-series");
  out << "node,year,beta,rank,norm_rank,cluster_id,cluster_size\n";
  for (const auto& [node, points] : series) {
    for (const auto& p : points) {
      out << detail::csv_field(node) << ',' << p.year << ',' << detail::num(p.beta) << ',' << p.rank << ','
          << detail::num(p.norm_rank) << ',' << p.cluster << ',' << p.cluster_size << '\n';
    }
  }
}

std::string emerging_to_json(std::span<const EmergingBridge> bridges, const EmergingCriteria& criteria) {
  nlohmann::ordered_json j;
  j["schema"] = detail::schema_id("emerging-bridges");
  j["criteria"] = {{"max_mean_rank", criteria.max_mean_rank},
                   {"min_coverage", criteria.min_coverage},
                   {"max_p_value", criteria.max_p_value},
                   {"min_abs_slope", criteria.min_abs_slope},
                   {"target", criteria.target == TrendTarget::kRawRank ? "rank" : "norm_rank"},
                   {"span", {criteria.span_first, criteria.span_last}}};
  auto list = nlohmann::ordered_json::array();
  for (const auto& b : bridges) {
    list.push_back({{"node", b.node},
                    {"slope", b.slope},
                    {"p", b.p_value},
                    {"years_covered", b.years_covered},
                    {"mean_rank", b.mean_rank},
                    {"direction", b.direction == TrendDirection::kRising ? "rising" : "declining"}});
  }
  j["bridges"] = std::move(list);
  return j.dump(2);
}

std::string ego_to_json(const EgoNetwork& ego, const CoocMatrix& matrix) {
  const auto& labels = matrix.labels();
  auto branch = [&](std::size_t i) { return labels[i].empty() ? std::string() : labels[i].substr(0, 1); };
  nlohmann::ordered_json j;
  j["schema"] = detail::schema_id("ego-network");
  j["window"] = {matrix.window().first, matrix.window().last};
  auto nodes = nlohmann::ordered_json::array();
  nodes.push_back({{"id", labels[ego.ego]}, {"ego", true}, {"weight", nullptr}, {"cluster", ego.ego_cluster},
                   {"branch", branch(ego.ego)}});
  for (const auto& nb : ego.neighbors) {
    nodes.push_back({{"id", labels[nb.node]}, {"ego", false}, {"weight", nb.weight}, {"cluster", nb.cluster},
                     {"branch", branch(nb.node)}});
  }
  auto links = nlohmann::ordered_json::array();
  for (const auto& nb : ego.neighbors) {
    links.push_back({{"source", labels[ego.ego]}, {"target", labels[nb.node]}, {"weight", nb.weight}});
  }
  const auto m = ego.neighbors.size();
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const double w = ego.neighbor_weights[a * m + b];
      if (w > 0) {
        links.push_back({{"source", labels[ego.neighbors[a].node]}, {"target", labels[ego.neighbors[b].node]},
                         {"weight", w}});
      }
    }
  }
  j["nodes"] = std::move(nodes);
  j["links"] = std::move(links);
  return j.dump(2);
}

}  // namespace meshforge
