#include "meshforge/clusters.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "format.hpp"
#include "json.hpp"
#include "meshforge/error.hpp"

namespace meshforge {

std::vector<std::size_t> Clustering::members(int cluster) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == cluster) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Clustering::excluded() const { return members(-1); }

namespace {

double node_weight(const CoocMatrix& m, std::size_t i, DiagonalMode diagonal) {
  double w = m.off_diagonal_strength(i);
  if (diagonal == DiagonalMode::kSelfLoop) w += m.at(i, i);
  return w;
}

// Compact weighted graph over the active nodes of one Louvain level.
struct Graph {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // no self entries
  std::vector<double> loops;
  std::vector<double> degree;
  double two_m = 0;

  std::size_t size() const noexcept { return adj.size(); }

  void finalize() {
    degree.assign(size(), 0.0);
    two_m = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      double k = 2 * loops[i];
      for (const auto& [j, w] : adj[i]) k += w;
      degree[i] = k;
      two_m += k;
    }
  }
};

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    auto r = rng();
    if (r >= threshold) return r % n;
  }
}

// Fisher-Yates with an explicit bounded draw; std::shuffle is not portable.
std::vector<std::size_t> visit_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
  return order;
}

// One local-moving phase. Returns true when any node changed community.
bool local_move(const Graph& g, std::vector<std::size_t>& comm, double resolution, double eps, int max_passes,
                std::mt19937_64& rng) {
  const auto n = g.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) tot[comm[i]] += g.degree[i];
  std::vector<double> neigh(n, -1.0);
  std::vector<std::size_t> touched;
  const auto order = visit_order(n, rng);
  bool any = false;
  for (int pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (auto i : order) {
      const auto home = comm[i];
      const double k = g.degree[i];
      for (const auto& [j, w] : g.adj[i]) {
        const auto c = comm[j];
        if (neigh[c] < 0) {
          neigh[c] = 0;
          touched.push_back(c);
        }
        neigh[c] += w;
      }
      tot[home] -= k;
      auto best = home;
      double best_gain = std::max(neigh[home], 0.0) - resolution * tot[home] * k / g.two_m;
      for (auto c : touched) {
        const double gain = neigh[c] - resolution * tot[c] * k / g.two_m;
        if (gain > best_gain + eps) {
          best = c;
          best_gain = gain;
        }
      }
      tot[best] += k;
      comm[i] = best;
      if (best != home) moved = true;
      for (auto c : touched) neigh[c] = -1.0;
      touched.clear();
    }
    if (!moved) break;
    any = true;
  }
  return any;
}

// Renumbers communities 0..k-1 in order of first appearance.
std::size_t renumber(std::vector<std::size_t>& comm) {
  std::vector<std::size_t> remap(comm.size(), SIZE_MAX);
  std::size_t next = 0;
  for (auto& c : comm) {
    if (remap[c] == SIZE_MAX) remap[c] = next++;
    c = remap[c];
  }
  return next;
}

Graph aggregate(const Graph& g, const std::vector<std::size_t>& comm, std::size_t k) {
  Graph out;
  out.adj.resize(k);
  out.loops.assign(k, 0.0);
  std::vector<std::map<std::size_t, double>> links(k);
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.loops[comm[i]] += g.loops[i];
    for (const auto& [j, w] : g.adj[i]) {
      if (comm[i] == comm[j]) {
        if (j > i) out.loops[comm[i]] += w;
      } else {
        links[comm[i]][comm[j]] += w;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) out.adj[c].assign(links[c].begin(), links[c].end());
  out.finalize();
  return out;
}

double graph_modularity(const Graph& g, const std::vector<std::size_t>& comm, double resolution) {
  if (g.two_m <= 0) return 0.0;
  const auto k = *std::max_element(comm.begin(), comm.end()) + 1;
  std::vector<double> in(k, 0.0), tot(k, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    in[comm[i]] += g.loops[i];
    tot[comm[i]] += g.degree[i];
    for (const auto& [j, w] : g.adj[i]) {
      if (j > i && comm[j] == comm[i]) in[comm[i]] += w;
    }
  }
  const double m = g.two_m / 2;
  double q = 0;
  for (std::size_t c = 0; c < k; ++c) q += in[c] / m - resolution * (tot[c] / g.two_m) * (tot[c] / g.two_m);
  return q;
}

}  // namespace

double modularity(const CoocMatrix& matrix, std::span<const int> assignment, double resolution,
                  DiagonalMode diagonal) {
  const auto n = matrix.size();
  if (assignment.size() != n) throw Error("assignment size does not match matrix");
  double m = 0;
  std::vector<double> degree(n, 0.0);
  std::map<int, double> internal, total;
  for (std::size_t i = 0; i < n; ++i) {
    if (assignment[i] < 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (assignment[j] < 0) continue;
      double w = matrix.pair_weight(i, j);
      if (i == j) {
        if (diagonal == DiagonalMode::kIgnore) continue;
        degree[i] += 2 * w;
        m += w;
        internal[assignment[i]] += w;
      } else {
        degree[i] += w;
        if (j > i) {
          m += w;
          if (assignment[i] == assignment[j]) internal[assignment[i]] += w;
        }
      }
    }
    total[assignment[i]] += degree[i];
  }
  if (m <= 0) return 0.0;
  double q = 0;
  for (const auto& [c, d] : total) q += internal[c] / m - resolution * (d / (2 * m)) * (d / (2 * m));
  return q;
}

Clustering make_clustering(const CoocMatrix& matrix, std::vector<int> assignment, const LouvainOptions& options) {
  const auto n = matrix.size();
  if (assignment.size() != n) throw Error("assignment size does not match matrix");
  std::map<int, std::pair<double, std::size_t>> stats;  // raw id -> (internal mass, first member)
  for (std::size_t i = 0; i < n; ++i) {
    if (assignment[i] < 0) continue;
    auto [it, fresh] = stats.try_emplace(assignment[i], 0.0, i);
    if (options.diagonal == DiagonalMode::kSelfLoop) it->second.first += matrix.at(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (assignment[j] == assignment[i]) it->second.first += matrix.pair_weight(i, j);
    }
  }
  std::vector<std::pair<int, std::pair<double, std::size_t>>> order(stats.begin(), stats.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.second.second < b.second.second;
  });
  std::map<int, int> canonical;
  for (std::size_t c = 0; c < order.size(); ++c) canonical[order[c].first] = static_cast<int>(c);

  Clustering out;
  out.labels = matrix.labels();
  out.window = matrix.window();
  out.seed = options.seed;
  out.resolution = options.resolution;
  out.cluster_sizes.assign(order.size(), 0);
  out.assignment.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (assignment[i] < 0) continue;
    out.assignment[i] = canonical[assignment[i]];
    ++out.cluster_sizes[static_cast<std::size_t>(out.assignment[i])];
  }
  out.modularity = modularity(matrix, out.assignment, options.resolution, options.diagonal);
  return out;
}

Clustering louvain(const CoocMatrix& matrix, const LouvainOptions& options) {
  const auto n = matrix.size();
  std::vector<std::size_t> active;
  std::vector<std::size_t> slot(n, SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    if (node_weight(matrix, i, options.diagonal) > 0) {
      slot[i] = active.size();
      active.push_back(i);
    }
  }
  if (active.empty()) throw Error("cannot cluster a matrix without weight");

  Graph base;
  base.adj.resize(active.size());
  base.loops.assign(active.size(), 0.0);
  for (std::size_t a = 0; a < active.size(); ++a) {
    const auto i = active[a];
    if (options.diagonal == DiagonalMode::kSelfLoop) base.loops[a] = matrix.at(i, i);
    for (std::size_t b = 0; b < active.size(); ++b) {
      if (b == a) continue;
      const double w = matrix.pair_weight(i, active[b]);
      if (w > 0) base.adj[a].emplace_back(b, w);
    }
  }
  base.finalize();

  std::mt19937_64 rng(options.seed);
  const double eps = options.min_gain * base.two_m;
  std::vector<std::size_t> membership(active.size());
  std::iota(membership.begin(), membership.end(), 0);

  Graph level = base;
  while (true) {
    std::vector<std::size_t> comm(level.size());
    std::iota(comm.begin(), comm.end(), 0);
    const bool moved = local_move(level, comm, options.resolution, eps, options.max_passes, rng);
    const auto k = renumber(comm);
    for (auto& m : membership) m = comm[m];
    if (!moved || k == level.size()) break;
    level = aggregate(level, comm, k);
    if (k == 1) break;
  }

  // Single-node refinement on the original graph.
  local_move(base, membership, options.resolution, eps, options.max_passes, rng);
  renumber(membership);

  double q = graph_modularity(base, membership, options.resolution);
  const double single = 1.0 - options.resolution;
  if (single > q + eps) {
    std::fill(membership.begin(), membership.end(), 0);
    q = graph_modularity(base, membership, options.resolution);
  }

  std::vector<int> assignment(n, -1);
  for (std::size_t a = 0; a < active.size(); ++a) assignment[active[a]] = static_cast<int>(membership[a]);
  auto out = make_clustering(matrix, std::move(assignment), options);
  out.modularity = q;
  return out;
}

std::vector<ClusterSizeRow> cluster_size_series(std::span<const Clustering> annual) {
  std::vector<ClusterSizeRow> rows;
  for (const auto& c : annual) {
    for (std::size_t id = 0; id < c.cluster_sizes.size(); ++id) {
      rows.push_back({c.window.first, static_cast<int>(id), c.cluster_sizes[id]});
    }
  }
  return rows;
}

CliqueCatalog stable_cliques(std::span<const Clustering> annual) {
  if (annual.empty()) throw Error("stable cliques need at least one clustering");
  const auto& labels = annual.front().labels;
  for (const auto& c : annual) {
    if (c.labels != labels) throw Error("clusterings use different label bases");
  }
  CliqueCatalog cat;
  cat.labels_ = labels;
  cat.clique_of_.assign(labels.size(), -1);
  std::map<std::vector<int>, int> by_key;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<int> key;
    key.reserve(annual.size());
    bool always_present = true;
    for (const auto& c : annual) {
      always_present = always_present && c.assignment[i] >= 0;
      key.push_back(c.assignment[i]);
    }
    if (!always_present) {
      cat.clique_of_[i] = static_cast<int>(cat.cliques_.size());
      cat.cliques_.push_back({i});
      continue;
    }
    auto [it, fresh] = by_key.try_emplace(std::move(key), static_cast<int>(cat.cliques_.size()));
    if (fresh) cat.cliques_.emplace_back();
    cat.cliques_[static_cast<std::size_t>(it->second)].push_back(i);
    cat.clique_of_[i] = it->second;
  }
  return cat;
}

std::set<int> CliqueCatalog::surrounding(const Clustering& clustering, std::size_t node) const {
  std::set<int> out;
  const int c = clustering.assignment.at(node);
  if (c < 0) return out;
  for (std::size_t j = 0; j < clustering.assignment.size(); ++j) {
    if (clustering.assignment[j] == c) out.insert(clique_of_[j]);
  }
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> overlap(const std::set<int>& a, const std::set<int>& b) {
  std::size_t common = 0;
  for (int x : a) common += b.count(x);
  return {common, a.size() + b.size() - common};
}

}  // namespace

double jaccard_distance(const std::set<int>& a, const std::set<int>& b) {
  const auto [common, uni] = overlap(a, b);
  return uni == 0 ? 0.0 : 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

std::optional<double> continuity(const CliqueCatalog& cliques, const Clustering& before, const Clustering& after,
                                 std::size_t node) {
  const auto qa = cliques.surrounding(before, node);
  const auto qb = cliques.surrounding(after, node);
  if (qa.empty() || qb.empty()) return std::nullopt;
  return jaccard_distance(qa, qb);
}

ContinuityReport continuity_series(const CliqueCatalog& cliques, std::span<const Clustering> annual) {
  ContinuityReport report;
  for (std::size_t t = 0; t + 1 < annual.size(); ++t) {
    ContinuityBins bins;
    bins.year = annual[t + 1].window.first;
    for (std::size_t m = 0; m < cliques.labels().size(); ++m) {
      const auto qa = cliques.surrounding(annual[t], m);
      const auto qb = cliques.surrounding(annual[t + 1], m);
      if (qa.empty() || qb.empty()) {
        ++report.skipped;
        continue;
      }
      const auto [common, uni] = overlap(qa, qb);
      if (common == uni) {
        ++bins.zero;
      } else if (common == 0) {
        ++bins.full;
      } else {
        ++bins.partial;
      }
      report.rows.push_back({bins.year, cliques.labels()[m], 1.0 - static_cast<double>(common) / static_cast<double>(uni)});
    }
    report.histogram.push_back(bins);
  }
  return report;
}

std::string clustering_to_json(const Clustering& clustering) {
  nlohmann::ordered_json j;
  j["schema"] = detail::schema_id("clustering");
  j["year"] = clustering.window.first;
  j["window"] = {clustering.window.first, clustering.window.last};
  j["seed"] = clustering.seed;
  j["resolution"] = clustering.resolution;
  j["modularity"] = clustering.modularity;
  j["labels"] = clustering.labels;
  auto clusters = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < clustering.cluster_count(); ++c) {
    std::vector<std::string> members;
    for (auto i : clustering.members(static_cast<int>(c))) members.push_back(clustering.labels[i]);
    clusters.push_back({{"id", c}, {"members", members}});
  }
  j["clusters"] = std::move(clusters);
  std::vector<std::string> excluded;
  for (auto i : clustering.excluded()) excluded.push_back(clustering.labels[i]);
  j["excluded"] = excluded;
  return j.dump();
}

Clustering clustering_from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("clustering artifact", "invalid JSON");
  try {
    Clustering c;
    c.labels = j.at("labels").get<std::vector<std::string>>();
    c.window = {j.at("window").at(0).get<int>(), j.at("window").at(1).get<int>()};
    c.seed = j.at("seed").get<std::uint64_t>();
    c.resolution = j.at("resolution").get<double>();
    c.modularity = j.at("modularity").get<double>();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < c.labels.size(); ++i) index[c.labels[i]] = i;
    c.assignment.assign(c.labels.size(), -1);
    for (const auto& cl : j.at("clusters")) {
      const auto id = cl.at("id").get<int>();
      const auto members = cl.at("members").get<std::vector<std::string>>();
      if (static_cast<std::size_t>(id) >= c.cluster_sizes.size()) c.cluster_sizes.resize(static_cast<std::size_t>(id) + 1, 0);
      c.cluster_sizes[static_cast<std::size_t>(id)] = members.size();
      for (const auto& m : members) c.assignment.at(index.at(m)) = id;
    }
    return c;
  } catch (const std::exception& e) {
    throw ParseError("clustering artifact", e.what());
  }
}

void write_cluster_sizes_csv(std::ostream& out, std::span<const ClusterSizeRow> rows) {
  detail::write_schema_line(out, "cluster-sizes");
  out << "year,cluster_id,size\n";
  for (const auto& r : rows) out << r.year << ',' << r.cluster << ',' << r.size << '\n';
}

std::string cliques_to_json(const CliqueCatalog& cliques) {
  nlohmann::ordered_json j;
  j["schema"] = detail::schema_id("cliques");
  auto list = nlohmann::ordered_json::array();
  for (std::size_t q = 0; q < cliques.size(); ++q) {
    std::vector<std::string> members;
    for (auto i : cliques.cliques()[q]) members.push_back(cliques.labels()[i]);
    list.push_back({{"id", q}, {"members", members}});
  }
  j["cliques"] = std::move(list);
  return j.dump(2);
}

void write_continuity_csv(std::ostream& out, const ContinuityReport& report) {
  detail::write_schema_line(out, "continuity");
  out << "year,node,delta_j\n";
  for (const auto& r : report.rows) out << r.year << ',' << detail::csv_field(r.node) << ',' << detail::num(r.delta_j) << '\n';
}

void write_continuity_histogram_csv(std::ostream& out, const ContinuityReport& report) {
  detail::write_schema_line(out, "continuity-histogram");
  out << "year,zero,partial,full\n";
  for (const auto& b : report.histogram) out << b.year << ',' << b.zero << ',' << b.partial << ',' << b.full << '\n';
}

}  // namespace meshforge
