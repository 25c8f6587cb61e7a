#include "meshforge/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <deque>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "format.hpp"
#include "json.hpp"
#include "meshforge/digest.hpp"
#include "meshforge/error.hpp"

namespace meshforge {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using Files = std::map<std::string, std::string>;
namespace fs = std::filesystem;

constexpr int kCacheLayout = 1;

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(fmt::format("config section '{}' must be an object", where));
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("unknown config key '{}{}{}'", where, where.empty() ? "" : ".", key));
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

const char* diagonal_name(DiagonalMode m) { return m == DiagonalMode::kSelfLoop ? "self_loop" : "ignore"; }

const char* mode_name(ConvergenceMode m) {
  switch (m) {
    case ConvergenceMode::kJ:
      return "J";
    case ConvergenceMode::kL:
      return "L";
    case ConvergenceMode::kJL:
      return "JL";
  }
  return "";
}

constexpr std::array<ConvergenceMode, 3> kModes{ConvergenceMode::kJ, ConvergenceMode::kL, ConvergenceMode::kJL};
constexpr std::array<TeamGroup, 5> kTeams{TeamGroup::kSolo, TeamGroup::kSmall, TeamGroup::kMedium, TeamGroup::kLarge,
                                          TeamGroup::kUnknown};

// Content-addressed stage outputs: <root>/<stage>/<key>/ plus CHECKSUMS.json.
class StageCache {
 public:
  explicit StageCache(fs::path root) : root_(std::move(root)) {}

  std::optional<Files> load(std::string_view stage, const std::string& key, bool& corrupt) const {
    corrupt = false;
    const auto dir = root_ / stage / key;
    if (!fs::exists(dir)) return std::nullopt;
    Files files;
    try {
      auto sums = json::parse(read_file(dir / "CHECKSUMS.json"));
      for (const auto& [name, digest] : sums.at("files").items()) {
        auto bytes = read_file(dir / name);
        if (sha256_hex(bytes) != digest.get<std::string>()) throw Error("checksum mismatch for " + name);
        files.emplace(name, std::move(bytes));
      }
    } catch (const std::exception& e) {
      spdlog::warn("cache entry {}/{} is corrupt ({}); recomputing", stage, key.substr(0, 12), e.what());
      corrupt = true;
      std::error_code ec;
      fs::remove_all(dir, ec);
      return std::nullopt;
    }
    return files;
  }

  void store(std::string_view stage, const std::string& key, const Files& files) const {
    const auto dir = root_ / stage / key;
    const auto tmp = root_ / stage / (key + ".partial");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    json sums;
    sums["files"] = json::object();
    for (const auto& [name, bytes] : files) {
      write_file(tmp / name, bytes);
      sums["files"][name] = sha256_hex(bytes);
    }
    write_file(tmp / "CHECKSUMS.json", sums.dump(1));
    fs::remove_all(dir, ec);
    fs::rename(tmp, dir);
  }

 private:
  fs::path root_;
};

// Per-shard scan state; merged in shard order.
struct ScanState {
  std::map<int, CoocAccumulator> l1, l2;
  DiversityAggregator by_window, by_year, by_team, by_journal;
  std::array<FractionCounter, 3> fx;
  CorpusStats stats;
  std::uint64_t excluded_refs = 0;
  std::uint64_t no_category = 0;
  std::string rows;

  explicit ScanState(const PipelineConfig& c)
      : by_window(AggregateKey::kYear, c.diversity_window, c.years.first, c.histogram_bins),
        by_year(AggregateKey::kYear, 1, c.years.first, c.histogram_bins),
        by_team(AggregateKey::kTeamYear, 1, c.years.first, c.histogram_bins),
        by_journal(AggregateKey::kJournal, 1, c.years.first, c.histogram_bins) {}

  void merge(const ScanState& o) {
    for (const auto& [y, acc] : o.l1) {
      auto [it, fresh] = l1.try_emplace(y, acc);
      if (!fresh) it->second.merge(acc);
    }
    for (const auto& [y, acc] : o.l2) {
      auto [it, fresh] = l2.try_emplace(y, acc);
      if (!fresh) it->second.merge(acc);
    }
    by_window.merge(o.by_window);
    by_year.merge(o.by_year);
    by_team.merge(o.by_team);
    by_journal.merge(o.by_journal);
    for (std::size_t k = 0; k < fx.size(); ++k) fx[k].merge(o.fx[k]);
    stats += o.stats;
    excluded_refs += o.excluded_refs;
    no_category += o.no_category;
    rows += o.rows;
  }
};

class ScanWorker {
 public:
  ScanWorker(const PipelineConfig& config, const OntologyTree& tree, ScanState& state)
      : config_(config), tree_(tree), state_(state), sa1_(1, tree.dimension(1)), sa2_(2, tree.dimension(2)) {}

  void operator()(ArticleRecord&& rec) {
    for (const auto& m : rec.mesh) {
      auto idx = tree_.index_of(m.id);
      if (!idx) {
        if (tree_.was_excluded(m.id)) {
          ++state_.excluded_refs;
        } else if (config_.unresolved == UnresolvedPolicy::kError) {
          throw ParseError("pmid " + rec.pmid, "unknown descriptor '" + m.id + "'");
        } else {
          ++state_.stats.unresolved_mesh_refs;
        }
        continue;
      }
      for (auto s : tree_.l1_slots(*idx)) {
        if (sa1_.counts[s]++ == 0) touched1_.push_back(s);
      }
      for (auto s : tree_.l2_slots(*idx)) {
        if (sa2_.counts[s]++ == 0) touched2_.push_back(s);
      }
    }
    if (touched1_.empty()) {
      ++state_.no_category;
      return;
    }
    std::sort(touched1_.begin(), touched1_.end());
    std::sort(touched2_.begin(), touched2_.end());
    accumulator(state_.l1, 1, rec.year).add_present(touched1_);
    accumulator(state_.l2, 2, rec.year).add_present(touched2_);

    const auto& sa = config_.diversity_level == 1 ? sa1_ : sa2_;
    if (auto fd = diversity_closed_form(sa.counts)) {
      DiversityRecord r{std::move(rec.pmid), rec.year, std::move(rec.journal), team_group(rec.authors), *fd,
                        config_.diversity_level};
      state_.by_window.add(r);
      state_.by_year.add(r);
      state_.by_team.add(r);
      state_.by_journal.add(r);
      if (config_.per_article) {
        fmt::format_to(std::back_inserter(state_.rows), "{},{},{},{},{},{}\n", detail::csv_field(r.pmid), r.year,
                       detail::csv_field(r.journal), to_string(r.team), detail::num(r.f_d), r.level);
      }
    }
    for (std::size_t k = 0; k < kModes.size(); ++k) {
      state_.fx[k].add(rec.year, f_x(sa1_, tree_.l1_labels(), kModes[k], config_.convergence));
    }

    for (auto s : touched1_) sa1_.counts[s] = 0;
    for (auto s : touched2_) sa2_.counts[s] = 0;
    touched1_.clear();
    touched2_.clear();
  }

 private:
  CoocAccumulator& accumulator(std::map<int, CoocAccumulator>& m, int level, int year) {
    auto it = m.find(year);
    if (it == m.end()) it = m.emplace(year, CoocAccumulator(level, tree_.dimension(level))).first;
    return it->second;
  }

  const PipelineConfig& config_;
  const OntologyTree& tree_;
  ScanState& state_;
  SAVector sa1_, sa2_;
  std::vector<std::uint16_t> touched1_, touched2_;
};

struct Shard {
  fs::path path;
  ByteRange range;
};

std::unique_ptr<ScanState> scan_shard(const PipelineConfig& config, const OntologyTree& tree, const Shard& shard) {
  auto state = std::make_unique<ScanState>(config);
  ScanWorker worker(config, tree, *state);
  state->stats = ingest_range(shard.path, shard.range, config.ingest, [&](ArticleRecord&& r) { worker(std::move(r)); });
  return state;
}

std::string matrix_path(int level, const std::string& label) { return fmt::format("matrices/L{}/{}.json", level, label); }
std::string cluster_path(int level, const std::string& label) { return fmt::format("clusters/L{}/{}.json", level, label); }

template <class Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

Files compute_scan(const PipelineConfig& config, const OntologyTree& tree, std::uint64_t& articles) {
  std::vector<Shard> shards;
  for (const auto& path : config.corpus) {
    for (const auto& r : plan_shards(path, config.shard_bytes)) shards.push_back({path, r});
  }
  ScanState total(config);
  const unsigned jobs = std::max(1u, config.jobs);
  if (jobs == 1) {
    for (const auto& s : shards) total.merge(*scan_shard(config, tree, s));
  } else {
    std::deque<std::future<std::unique_ptr<ScanState>>> inflight;
    std::size_t next = 0;
    auto refill = [&] {
      while (next < shards.size() && inflight.size() < jobs) {
        const auto& s = shards[next++];
        inflight.push_back(std::async(std::launch::async, [&config, &tree, &s] { return scan_shard(config, tree, s); }));
      }
    };
    refill();
    while (!inflight.empty()) {
      auto part = inflight.front().get();
      inflight.pop_front();
      total.merge(*part);
      refill();
    }
  }
  articles = total.stats.articles_kept;
  spdlog::info("scan: {} shards, {} articles kept of {}", shards.size(), total.stats.articles_kept,
               total.stats.articles_read);

  Files files;
  ojson index;
  index["schema"] = detail::schema_id("matrix-index");
  index["labels"] = {{"1", tree.l1_labels()}, {"2", tree.l2_index()}};
  std::vector<int> years;
  for (const auto& [y, acc] : total.l1) years.push_back(y);
  index["annual"] = years;

  for (int level : {1, 2}) {
    auto& annual = level == 1 ? total.l1 : total.l2;
    const auto& labels = tree.labels(level);
    for (const auto& [y, acc] : annual) {
      files[matrix_path(level, std::to_string(y))] = matrix_to_json(acc.finish(labels, {y, y}));
    }
  }
  auto periods = ojson::array();
  for (const auto& p : config.periods) {
    bool any = false;
    for (int level : {1, 2}) {
      auto& annual = level == 1 ? total.l1 : total.l2;
      CoocAccumulator merged(level, tree.dimension(level));
      for (const auto& [y, acc] : annual) {
        if (p.contains(y)) merged.merge(acc);
      }
      if (merged.article_count() == 0) continue;
      any = true;
      const auto m = merged.finish(tree.labels(level), p);
      const auto stem = fmt::format("matrices/L{}/{}", level, p.label());
      files[stem + ".json"] = matrix_to_json(m);
      files[stem + ".csv"] = to_text([&](std::ostream& o) { write_matrix_csv(o, m); });
      files[stem + ".meta.json"] = to_text([&](std::ostream& o) { write_matrix_sidecar(o, m); });
      files[stem + ".edges.tsv"] = to_text([&](std::ostream& o) { write_edge_list_tsv(o, m); });
    }
    if (any) {
      periods.push_back(p.label());
    } else {
      spdlog::warn("period {} has no articles; skipped", p.label());
    }
  }
  index["periods"] = std::move(periods);
  files["matrices/index.json"] = index.dump(2);

  if (config.per_article) {
    files["diversity/articles.csv"] = to_text([&](std::ostream& o) { write_diversity_header(o); }) + total.rows;
  }
  files["diversity/by_window.csv"] = to_text([&](std::ostream& o) { write_group_stats_csv(o, total.by_window); });
  files["diversity/by_year.csv"] = to_text([&](std::ostream& o) { write_group_stats_csv(o, total.by_year); });
  files["diversity/by_team_year.csv"] = to_text([&](std::ostream& o) { write_group_stats_csv(o, total.by_team); });
  files["diversity/histogram.csv"] = to_text([&](std::ostream& o) { write_histogram_csv(o, total.by_window); });
  const auto ranking = journal_ranking(total.by_journal, config.min_journal_articles);
  files["diversity/journal_ranking.csv"] = to_text([&](std::ostream& o) { write_journal_ranking_csv(o, ranking); });
  std::map<std::string, std::vector<YearFraction>> fx;
  for (std::size_t k = 0; k < kModes.size(); ++k) fx[mode_name(kModes[k])] = total.fx[k].series();
  files["diversity/fx.csv"] = to_text([&](std::ostream& o) { write_fraction_csv(o, fx); });

  // Compact series consumed by the trend stage and by export-plotdata.
  ojson series;
  series["schema"] = detail::schema_id("diversity-series");
  series["years"] = {config.years.first, config.years.last};
  series["level"] = config.diversity_level;
  series["window_years"] = config.diversity_window;
  auto fxj = ojson::object();
  for (const auto& [mode, rows] : fx) {
    auto arr = ojson::array();
    for (const auto& r : rows) arr.push_back({r.year, r.flagged, r.total});
    fxj[mode] = std::move(arr);
  }
  series["fx"] = std::move(fxj);
  auto means = ojson::object();
  auto stat_row = [](int year, const GroupStats& s) { return ojson::array({year, s.mean(), s.stddev(), s.count}); };
  means["all"] = ojson::array();
  for (const auto& [k, s] : total.by_year.groups()) means["all"].push_back(stat_row(k.year, s));
  for (auto team : kTeams) means[to_string(team)] = ojson::array();
  for (const auto& [k, s] : total.by_team.groups()) means[to_string(*k.team)].push_back(stat_row(k.year, s));
  series["yearly"] = std::move(means);
  auto windows = ojson::array();
  for (const auto& [k, s] : total.by_window.groups()) windows.push_back(stat_row(k.year, s));
  series["windows"] = std::move(windows);
  files["diversity/series.json"] = series.dump(1);

  ojson st;
  st["schema"] = detail::schema_id("ingest-stats");
  st["articles_read"] = total.stats.articles_read;
  st["articles_kept"] = total.stats.articles_kept;
  st["dropped_no_major_mesh"] = total.stats.dropped_no_major_mesh;
  st["dropped_out_of_range"] = total.stats.dropped_out_of_range;
  st["dropped_pub_type"] = total.stats.dropped_pub_type;
  st["malformed_lines"] = total.stats.malformed_lines;
  st["unresolved_mesh_refs"] = total.stats.unresolved_mesh_refs;
  st["excluded_mesh_refs"] = total.excluded_refs;
  st["articles_without_category"] = total.no_category;
  st["shards"] = shards.size();
  files["ingest_stats.json"] = st.dump(2);
  return files;
}

const std::string& need(const Files& files, const std::string& name, std::string_view stage) {
  auto it = files.find(name);
  if (it == files.end()) throw StageError(std::string(stage), "missing upstream artifact " + name);
  return it->second;
}

struct MatrixIndex {
  std::vector<int> annual;
  std::vector<std::string> periods;
};

MatrixIndex read_index(const std::string& text) {
  auto j = json::parse(text);
  MatrixIndex idx;
  for (const auto& y : j.at("annual")) idx.annual.push_back(y.get<int>());
  for (const auto& p : j.at("periods")) idx.periods.push_back(p.get<std::string>());
  return idx;
}

Files compute_cluster(const PipelineConfig& config, const Files& scan) {
  const auto idx = read_index(need(scan, "matrices/index.json", "cluster"));
  const int level = config.cluster_level;
  Files files;
  std::vector<Clustering> annual;
  auto done_years = json::array();
  for (int y : idx.annual) {
    const auto m = matrix_from_json(need(scan, matrix_path(level, std::to_string(y)), "cluster"));
    if (m.total_mass() <= 0) {
      spdlog::warn("year {} has an empty L{} matrix; not clustered", y, level);
      continue;
    }
    annual.push_back(louvain(m, config.louvain));
    files[cluster_path(level, std::to_string(y))] = clustering_to_json(annual.back());
    done_years.push_back(y);
  }
  auto done_periods = json::array();
  for (const auto& p : idx.periods) {
    const auto m = matrix_from_json(need(scan, matrix_path(level, p), "cluster"));
    if (m.total_mass() <= 0) continue;
    const auto c = louvain(m, config.louvain);
    files[cluster_path(level, p)] = clustering_to_json(c);
    done_periods.push_back(p);
    try {
      const auto tree = mst_hierarchy(m);
      files["mst/" + p + ".tsv"] = to_text([&](std::ostream& o) {
        detail::write_schema_line(o, "spanning-tree");
        o << "label_a\tlabel_b\tweight\n";
        for (const auto& e : tree.edges) {
          o << m.labels()[e.a] << '\t' << m.labels()[e.b] << '\t' << detail::num(e.weight) << '\n';
        }
      });
    } catch (const Error& e) {
      spdlog::warn("no spanning tree for {}: {}", p, e.what());
    }
  }
  const auto rows = cluster_size_series(annual);
  files["clusters/cluster_sizes.csv"] = to_text([&](std::ostream& o) { write_cluster_sizes_csv(o, rows); });
  ojson index;
  index["schema"] = detail::schema_id("cluster-index");
  index["level"] = level;
  index["annual"] = done_years;
  index["periods"] = done_periods;
  files["clusters/index.json"] = index.dump(2);
  return files;
}

struct ClusteredYear {
  CoocMatrix matrix;
  Clustering clustering;
};

std::vector<ClusteredYear> load_clustered(const PipelineConfig& config, const Files& scan, const Files& clusters,
                                          std::string_view section, std::string_view stage) {
  auto idx = json::parse(need(clusters, "clusters/index.json", stage));
  std::vector<ClusteredYear> out;
  for (const auto& item : idx.at(std::string(section))) {
    const auto label = item.is_string() ? item.get<std::string>() : std::to_string(item.get<int>());
    out.push_back({matrix_from_json(need(scan, matrix_path(config.cluster_level, label), stage)),
                   clustering_from_json(need(clusters, cluster_path(config.cluster_level, label), stage))});
  }
  return out;
}

Files compute_bridges(const PipelineConfig& config, const Files& scan, const Files& clusters) {
  const auto years = load_clustered(config, scan, clusters, "annual", "bridges");
  std::vector<BridgeScores> yearly;
  for (const auto& y : years) {
    auto s = bridge_scores(y.matrix, y.clustering);
    normalized_ranks(s, y.clustering, config.rank_scope);
    yearly.push_back(std::move(s));
  }
  const auto series = assemble_series(yearly);
  auto criteria = config.emerging;
  criteria.span_first = config.years.first;
  criteria.span_last = config.years.last;
  const auto emerging = detect_emerging(series, criteria);

  Files files;
  files["bridges/series.csv"] = to_text([&](std::ostream& o) { write_bridge_series_csv(o, series); });
  files["bridges/emerging.json"] = emerging_to_json(emerging, criteria);

  std::vector<std::string> egos = config.ego_nodes;
  for (const auto& e : emerging) {
    if (std::find(egos.begin(), egos.end(), e.node) == egos.end()) egos.push_back(e.node);
  }
  if (!egos.empty()) {
    auto periods = load_clustered(config, scan, clusters, "periods", "bridges");
    const ClusteredYear* base = !periods.empty() ? &periods.back() : (!years.empty() ? &years.back() : nullptr);
    if (base) {
      for (const auto& node : egos) {
        const auto ego = ego_subnetwork(base->matrix, base->clustering, node, config.ego_k);
        files["bridges/ego/" + node + ".json"] = ego_to_json(ego, base->matrix);
      }
    }
  }
  return files;
}

Files compute_continuity(const PipelineConfig& config, const Files& scan, const Files& clusters) {
  const auto years = load_clustered(config, scan, clusters, "annual", "continuity");
  std::vector<Clustering> annual;
  for (const auto& y : years) annual.push_back(y.clustering);
  Files files;
  ContinuityReport report;
  if (!annual.empty()) {
    const auto cliques = stable_cliques(annual);
    report = continuity_series(cliques, annual);
    files["continuity/cliques.json"] = cliques_to_json(cliques);
  }
  files["continuity/delta_j.csv"] = to_text([&](std::ostream& o) { write_continuity_csv(o, report); });
  files["continuity/histogram.csv"] = to_text([&](std::ostream& o) { write_continuity_histogram_csv(o, report); });
  return files;
}

Files compute_trend(const PipelineConfig& config, const Files& scan) {
  const auto series = json::parse(need(scan, "diversity/series.json", "trend"));
  std::map<std::string, TrendFit> fits;
  std::map<std::string, std::vector<std::pair<int, double>>> observed;
  for (const auto& [group, rows] : series.at("yearly").items()) {
    std::vector<std::pair<int, double>> points;
    for (const auto& r : rows) points.emplace_back(r.at(0).get<int>(), r.at(1).get<double>());
    if (points.size() < 4) {
      spdlog::info("trend: group {} has {} years; not fitted", group, points.size());
      continue;
    }
    try {
      fits.emplace(group, trend_fit(points, config.trend_center));
      observed.emplace(group, std::move(points));
    } catch (const Error& e) {
      spdlog::warn("trend: group {} not fitted: {}", group, e.what());
    }
  }
  Files files;
  files["diversity/trend.json"] = trend_to_json(fits);
  files["diversity/trend.csv"] = to_text([&](std::ostream& o) { write_trend_csv(o, fits, observed); });
  return files;
}

std::string key_of(std::initializer_list<std::string_view> parts) {
  Sha256 h;
  h.update(fmt::format("meshforge-cache-{}\n", kCacheLayout));
  for (auto p : parts) {
    h.update(p);
    h.update("\n");
  }
  return h.hex();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig PipelineConfig::from_json(std::string_view text, const fs::path& base_dir) {
  auto j = json::parse(text, nullptr, false, true);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");
  PipelineConfig c;
  try {
    check_keys(j, {"corpus", "ontology", "branches", "years", "ingest", "periods", "cluster", "bridges", "diversity",
                   "out_dir", "cache_dir", "jobs", "seed"},
               "");
    if (j.contains("corpus")) {
      const auto& v = j["corpus"];
      if (v.is_string()) {
        c.corpus.push_back(resolve(base_dir, v.get<std::string>()));
      } else {
        for (const auto& p : v) c.corpus.push_back(resolve(base_dir, p.get<std::string>()));
      }
    }
    if (j.contains("ontology")) c.ontology = resolve(base_dir, j["ontology"].get<std::string>());
    c.branches = j.value("branches", c.branches);
    BranchSet::parse(c.branches);
    if (j.contains("years")) {
      c.years = {j["years"].at(0).get<int>(), j["years"].at(1).get<int>()};
      if (c.years.first > c.years.last) throw ConfigError("years range is inverted");
    }
    if (j.contains("ingest")) {
      const auto& s = j["ingest"];
      check_keys(s, {"mesh", "pub_types", "on_error", "unresolved", "shard_mb"}, "ingest");
      const auto mesh = s.value("mesh", std::string("major"));
      if (mesh != "major" && mesh != "all") throw ConfigError("ingest.mesh must be 'major' or 'all'");
      c.ingest.filter = mesh == "major" ? MeshFilter::kMajorOnly : MeshFilter::kAll;
      c.ingest.pub_types = s.value("pub_types", c.ingest.pub_types);
      const auto on_error = s.value("on_error", std::string("skip"));
      if (on_error != "skip" && on_error != "fail") throw ConfigError("ingest.on_error must be 'skip' or 'fail'");
      c.ingest.on_error = on_error == "skip" ? ErrorPolicy::kSkip : ErrorPolicy::kFailFast;
      const auto unresolved = s.value("unresolved", std::string("skip"));
      if (unresolved != "skip" && unresolved != "error") {
        throw ConfigError("ingest.unresolved must be 'skip' or 'error'");
      }
      c.unresolved = unresolved == "skip" ? UnresolvedPolicy::kSkip : UnresolvedPolicy::kError;
      const auto mb = s.value("shard_mb", 32.0);
      if (!(mb > 0)) throw ConfigError("ingest.shard_mb must be positive");
      c.shard_bytes = static_cast<std::uint64_t>(mb * 1024 * 1024);
    }
    if (j.contains("periods")) {
      c.periods.clear();
      for (const auto& p : j["periods"]) c.periods.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    }
    if (j.contains("cluster")) {
      const auto& s = j["cluster"];
      check_keys(s, {"level", "seed", "resolution", "diagonal", "max_passes"}, "cluster");
      c.cluster_level = s.value("level", c.cluster_level);
      c.louvain.seed = s.value("seed", c.louvain.seed);
      c.louvain.resolution = s.value("resolution", c.louvain.resolution);
      c.louvain.max_passes = s.value("max_passes", c.louvain.max_passes);
      const auto diag = s.value("diagonal", std::string("self_loop"));
      if (diag != "self_loop" && diag != "ignore") throw ConfigError("cluster.diagonal must be 'self_loop' or 'ignore'");
      c.louvain.diagonal = diag == "self_loop" ? DiagonalMode::kSelfLoop : DiagonalMode::kIgnore;
    }
    if (j.contains("seed")) c.louvain.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("bridges")) {
      const auto& s = j["bridges"];
      check_keys(s, {"scope", "max_mean_rank", "min_coverage", "max_p_value", "min_abs_slope", "target", "ego_nodes",
                     "ego_k"},
                 "bridges");
      const auto scope = s.value("scope", std::string("cluster"));
      if (scope != "cluster" && scope != "global") throw ConfigError("bridges.scope must be 'cluster' or 'global'");
      c.rank_scope = scope == "cluster" ? RankScope::kWithinCluster : RankScope::kGlobal;
      c.emerging.max_mean_rank = s.value("max_mean_rank", c.emerging.max_mean_rank);
      c.emerging.min_coverage = s.value("min_coverage", c.emerging.min_coverage);
      c.emerging.max_p_value = s.value("max_p_value", c.emerging.max_p_value);
      c.emerging.min_abs_slope = s.value("min_abs_slope", c.emerging.min_abs_slope);
      const auto target = s.value("target", std::string("rank"));
      if (target != "rank" && target != "norm_rank") throw ConfigError("bridges.target must be 'rank' or 'norm_rank'");
      c.emerging.target = target == "rank" ? TrendTarget::kRawRank : TrendTarget::kNormalizedRank;
      c.ego_nodes = s.value("ego_nodes", c.ego_nodes);
      c.ego_k = s.value("ego_k", c.ego_k);
    }
    if (j.contains("diversity")) {
      const auto& s = j["diversity"];
      check_keys(s, {"level", "window_years", "bins", "per_article", "trend_center", "core_min", "flag_min",
                     "strict_jl", "min_journal_articles"},
                 "diversity");
      c.diversity_level = s.value("level", c.diversity_level);
      c.diversity_window = s.value("window_years", c.diversity_window);
      c.histogram_bins = s.value("bins", c.histogram_bins);
      c.per_article = s.value("per_article", c.per_article);
      c.trend_center = s.value("trend_center", c.trend_center);
      c.convergence.core_min = s.value("core_min", c.convergence.core_min);
      c.convergence.flag_min = s.value("flag_min", c.convergence.flag_min);
      c.convergence.strict_jl = s.value("strict_jl", c.convergence.strict_jl);
      c.min_journal_articles = s.value("min_journal_articles", c.min_journal_articles);
    }
    if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j["out_dir"].get<std::string>());
    if (j.contains("cache_dir")) c.cache_dir = resolve(base_dir, j["cache_dir"].get<std::string>());
    c.jobs = j.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.cluster_level != 1 && c.cluster_level != 2) throw ConfigError("cluster.level must be 1 or 2");
  if (c.diversity_level != 1 && c.diversity_level != 2) throw ConfigError("diversity.level must be 1 or 2");
  if (c.diversity_window < 1) throw ConfigError("diversity.window_years must be at least 1");
  if (c.histogram_bins < 1) throw ConfigError("diversity.bins must be at least 1");
  WindowSet::make(c.periods);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return from_json(text, path.parent_path());
}

std::string PipelineConfig::canonical_json() const {
  ojson j;
  j["scan"] = {{"branches", BranchSet::parse(branches).letters()},
               {"years", {years.first, years.last}},
               {"mesh", ingest.filter == MeshFilter::kMajorOnly ? "major" : "all"},
               {"pub_types", ingest.pub_types},
               {"on_error", ingest.on_error == ErrorPolicy::kSkip ? "skip" : "fail"},
               {"unresolved", unresolved == UnresolvedPolicy::kSkip ? "skip" : "error"},
               {"periods", ojson::array()},
               {"diversity_level", diversity_level},
               {"window_years", diversity_window},
               {"bins", histogram_bins},
               {"per_article", per_article},
               {"core_min", convergence.core_min},
               {"flag_min", convergence.flag_min},
               {"strict_jl", convergence.strict_jl},
               {"min_journal_articles", min_journal_articles}};
  for (const auto& p : periods) j["scan"]["periods"].push_back({p.first, p.last});
  j["cluster"] = {{"level", cluster_level},
                  {"seed", louvain.seed},
                  {"resolution", louvain.resolution},
                  {"diagonal", diagonal_name(louvain.diagonal)},
                  {"min_gain", louvain.min_gain},
                  {"max_passes", louvain.max_passes}};
  j["bridges"] = {{"scope", rank_scope == RankScope::kWithinCluster ? "cluster" : "global"},
                  {"max_mean_rank", emerging.max_mean_rank},
                  {"min_coverage", emerging.min_coverage},
                  {"max_p_value", emerging.max_p_value},
                  {"min_abs_slope", emerging.min_abs_slope},
                  {"target", emerging.target == TrendTarget::kRawRank ? "rank" : "norm_rank"},
                  {"ego_nodes", ego_nodes},
                  {"ego_k", ego_k}};
  j["trend"] = {{"center", trend_center}};
  return j.dump();
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical_json()); }

const char* to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::kScan:
      return "scan";
    case Stage::kCluster:
      return "cluster";
    case Stage::kBridges:
      return "bridges";
    case Stage::kContinuity:
      return "continuity";
    case Stage::kTrend:
      return "trend";
  }
  return "";
}

const StageReport* RunReport::find(std::string_view name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Run

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {}

RunReport Pipeline::run() {
  return run({Stage::kScan, Stage::kCluster, Stage::kBridges, Stage::kContinuity, Stage::kTrend});
}

RunReport Pipeline::run(std::set<Stage> stages) {
  if (stages.count(Stage::kBridges) || stages.count(Stage::kContinuity)) stages.insert(Stage::kCluster);
  stages.insert(Stage::kScan);

  const auto& c = config_;
  if (c.corpus.empty()) throw ConfigError("no corpus configured");
  if (c.ontology.empty()) throw ConfigError("no ontology configured");
  for (const auto& p : c.corpus) {
    if (!fs::is_regular_file(p)) throw ConfigError("corpus file not found: " + p.string());
  }
  if (!fs::is_regular_file(c.ontology)) throw ConfigError("ontology file not found: " + c.ontology.string());

  fs::create_directories(c.out_dir);
  const auto marker = c.out_dir / "INCOMPLETE";
  write_file(marker, "run in progress\n");

  RunReport report;
  StageCache cache(c.cache_dir);
  const auto canonical = json::parse(c.canonical_json());
  std::string current = "inputs";
  try {
    const auto ontology_digest = sha256_file(c.ontology);
    std::vector<std::string> corpus_digests;
    for (const auto& p : c.corpus) corpus_digests.push_back(sha256_file(p));

    auto stage = [&](Stage s, const std::string& key, const std::function<Files()>& compute) {
      current = to_string(s);
      const auto start = std::chrono::steady_clock::now();
      StageReport r;
      r.name = current;
      r.key = key;
      bool corrupt = false;
      auto cached = cache.load(r.name, key, corrupt);
      r.recovered = corrupt;
      Files files;
      if (cached) {
        r.cache_hit = true;
        files = std::move(*cached);
      } else {
        try {
          files = compute();
        } catch (const ParseError&) {
          throw;
        } catch (const ConfigError&) {
          throw;
        } catch (const StageError&) {
          throw;
        } catch (const std::exception& e) {
          throw StageError(r.name, e.what());
        }
        cache.store(r.name, key, files);
      }
      for (const auto& [name, bytes] : files) write_file(c.out_dir / name, bytes);
      r.files = files.size();
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      spdlog::info("stage {}: {} ({} files, {:.2f} s)", r.name, r.cache_hit ? "cached" : "computed", r.files,
                   r.seconds);
      report.stages.push_back(std::move(r));
      return files;
    };

    std::string digests;
    for (const auto& d : corpus_digests) digests += d + ",";
    const auto scan_key = key_of({"scan", ontology_digest, digests, canonical["scan"].dump()});
    std::uint64_t articles = 0;
    const auto scan = stage(Stage::kScan, scan_key, [&] {
      const auto tree = load_ontology(c.ontology, BranchSet::parse(c.branches));
      if (tree.dimension(2) > 65535) throw Error("too many L2 headings");
      return compute_scan(c, tree, articles);
    });

    const auto cluster_key = key_of({"cluster", scan_key, canonical["cluster"].dump()});
    Files clusters;
    if (stages.count(Stage::kCluster)) clusters = stage(Stage::kCluster, cluster_key, [&] { return compute_cluster(c, scan); });
    if (stages.count(Stage::kBridges)) {
      const auto key = key_of({"bridges", cluster_key, canonical["bridges"].dump(), canonical["scan"]["years"].dump()});
      stage(Stage::kBridges, key, [&] { return compute_bridges(c, scan, clusters); });
    }
    if (stages.count(Stage::kContinuity)) {
      stage(Stage::kContinuity, key_of({"continuity", cluster_key}), [&] { return compute_continuity(c, scan, clusters); });
    }
    if (stages.count(Stage::kTrend)) {
      stage(Stage::kTrend, key_of({"trend", scan_key, canonical["trend"].dump()}), [&] { return compute_trend(c, scan); });
    }

    const auto stats = json::parse(scan.at("ingest_stats.json"));
    report.ingest.articles_read = stats.at("articles_read");
    report.ingest.articles_kept = stats.at("articles_kept");
    report.ingest.dropped_no_major_mesh = stats.at("dropped_no_major_mesh");
    report.ingest.dropped_out_of_range = stats.at("dropped_out_of_range");
    report.ingest.dropped_pub_type = stats.at("dropped_pub_type");
    report.ingest.malformed_lines = stats.at("malformed_lines");
    report.ingest.unresolved_mesh_refs = stats.at("unresolved_mesh_refs");

    ojson manifest;
    manifest["schema"] = detail::schema_id("manifest");
    manifest["tool_version"] = MESHFORGE_VERSION;
    manifest["config_hash"] = c.hash();
    manifest["config"] = ojson::parse(c.canonical_json());
    auto inputs = ojson::array();
    for (std::size_t i = 0; i < c.corpus.size(); ++i) {
      inputs.push_back({{"path", c.corpus[i].string()}, {"sha256", corpus_digests[i]}});
    }
    manifest["inputs"] = std::move(inputs);
    manifest["ontology"] = {{"path", c.ontology.string()}, {"sha256", ontology_digest}};
    manifest["seed"] = c.louvain.seed;
    auto st = ojson::array();
    for (const auto& r : report.stages) {
      st.push_back({{"name", r.name}, {"key", r.key}, {"cache_hit", r.cache_hit}, {"recovered", r.recovered},
                    {"files", r.files}, {"seconds", r.seconds}});
    }
    manifest["stages"] = std::move(st);
    manifest["counts"] = stats;
    report.manifest = c.out_dir / "manifest.json";
    write_file(report.manifest, manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    write_file(marker, fmt::format("failed in stage {}: {}\n", current, e.what()));
    throw;
  }
  fs::remove(marker);
  return report;
}

// ---------------------------------------------------------------------------
// Plot data

std::vector<std::size_t> heatmap_order(const CoocMatrix& matrix, const Clustering& clustering) {
  const auto n = matrix.size();
  if (clustering.assignment.size() != n) throw Error("clustering does not match matrix");
  std::vector<double> prevalence(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) prevalence[i] += matrix.at(i, j);
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto cluster_rank = [&](std::size_t i) {
    return clustering.assignment[i] < 0 ? std::numeric_limits<int>::max() : clustering.assignment[i];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cluster_rank(a) != cluster_rank(b)) return cluster_rank(a) < cluster_rank(b);
    if (prevalence[a] != prevalence[b]) return prevalence[a] > prevalence[b];
    return a < b;
  });
  return order;
}

void write_heatmap_csv(std::ostream& out, const CoocMatrix& matrix, const Clustering& clustering) {
  const auto order = heatmap_order(matrix, clustering);
  detail::write_schema_line(out, "heatmap");
  out << "label,cluster";
  for (auto i : order) out << ',' << detail::csv_field(matrix.labels()[i]);
  out << '\n';
  for (auto i : order) {
    out << detail::csv_field(matrix.labels()[i]) << ',' << clustering.assignment[i];
    for (auto j : order) out << ',' << detail::num(matrix.at(i, j));
    out << '\n';
  }
}

namespace {

std::string artifact(const fs::path& run_dir, const std::string& name, std::string_view producer) {
  const auto path = run_dir / name;
  if (!fs::is_regular_file(path)) {
    throw Error(fmt::format("missing artifact {}; run `meshforge {}` (or `meshforge run`) first", path.string(),
                            producer));
  }
  return read_file(path);
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

void export_plotdata(const fs::path& run_dir, const fs::path& plot_dir) {
  const auto cindex = json::parse(artifact(run_dir, "clusters/index.json", "cluster"));
  const auto series = json::parse(artifact(run_dir, "diversity/series.json", "diversity"));
  const auto bridge_csv = artifact(run_dir, "bridges/series.csv", "bridges");
  const int level = cindex.at("level").get<int>();
  fs::create_directories(plot_dir);

  for (const auto& p : cindex.at("periods")) {
    const auto label = p.get<std::string>();
    const auto m = matrix_from_json(artifact(run_dir, matrix_path(level, label), "cooccur"));
    const auto cl = clustering_from_json(artifact(run_dir, cluster_path(level, label), "cluster"));
    write_file(plot_dir / fmt::format("heatmap_L{}_{}.csv", level, label),
               to_text([&](std::ostream& o) { write_heatmap_csv(o, m, cl); }));
  }

  BridgeSeries bridges;
  std::istringstream in(bridge_csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 7) throw ParseError("bridges/series.csv", "expected 7 columns in '" + line + "'");
    bridges[f[0]].push_back({std::stoi(f[1]), std::stod(f[2]), std::stoi(f[3]), std::stod(f[4]), std::stoi(f[5]),
                             static_cast<std::size_t>(std::stoull(f[6]))});
  }
  write_file(plot_dir / "bridge_ranks.csv", to_text([&](std::ostream& o) {
               detail::write_schema_line(o, "bridge-ranks");
               o << "node,year,rank,norm_rank,norm_rank_ma5\n";
               for (const auto& [node, points] : bridges) {
                 const auto ma = moving_average(points, 5);
                 for (std::size_t i = 0; i < points.size(); ++i) {
                   o << detail::csv_field(node) << ',' << points[i].year << ',' << points[i].rank << ','
                     << detail::num(points[i].norm_rank) << ',' << detail::num(ma[i]) << '\n';
                 }
               }
             }));

  const int first = series.at("years").at(0).get<int>();
  const int last = series.at("years").at(1).get<int>();
  std::map<std::string, std::map<int, std::pair<std::uint64_t, std::uint64_t>>> fx;
  for (const auto& [mode, rows] : series.at("fx").items()) {
    for (const auto& r : rows) fx[mode][r.at(0).get<int>()] = {r.at(1).get<std::uint64_t>(), r.at(2).get<std::uint64_t>()};
  }
  write_file(plot_dir / "fx.csv", to_text([&](std::ostream& o) {
               detail::write_schema_line(o, "fx-series");
               o << "year,total";
               for (auto mode : kModes) o << ",fx_" << mode_name(mode);
               o << '\n';
               for (int y = first; y <= last; ++y) {
                 std::uint64_t total = 0;
                 for (auto mode : kModes) {
                   auto it = fx[mode_name(mode)].find(y);
                   if (it != fx[mode_name(mode)].end()) total = it->second.second;
                 }
                 o << y << ',' << total;
                 for (auto mode : kModes) {
                   auto it = fx[mode_name(mode)].find(y);
                   o << ',';
                   if (it != fx[mode_name(mode)].end() && it->second.second > 0) {
                     o << detail::num(static_cast<double>(it->second.first) / static_cast<double>(it->second.second));
                   }
                 }
                 o << '\n';
               }
             }));

  const int window = series.at("window_years").get<int>();
  write_file(plot_dir / "mean_fd.csv", to_text([&](std::ostream& o) {
               detail::write_schema_line(o, "mean-diversity");
               o << "window_start,window_end,mean,std,count\n";
               for (const auto& r : series.at("windows")) {
                 const int start = r.at(0).get<int>();
                 o << start << ',' << start + window - 1 << ',' << detail::num(r.at(1).get<double>()) << ','
                   << detail::num(r.at(2).get<double>()) << ',' << r.at(3).get<std::uint64_t>() << '\n';
               }
             }));
  write_file(plot_dir / "mean_fd_by_team.csv", to_text([&](std::ostream& o) {
               detail::write_schema_line(o, "mean-diversity-team");
               o << "group,year,mean,std,count\n";
               for (const auto& [group, rows] : series.at("yearly").items()) {
                 for (const auto& r : rows) {
                   o << group << ',' << r.at(0).get<int>() << ',' << detail::num(r.at(1).get<double>()) << ','
                     << detail::num(r.at(2).get<double>()) << ',' << r.at(3).get<std::uint64_t>() << '\n';
                 }
               }
             }));

  write_file(plot_dir / "fd_histogram.csv", artifact(run_dir, "diversity/histogram.csv", "diversity"));
  write_file(plot_dir / "cluster_sizes.csv", artifact(run_dir, "clusters/cluster_sizes.csv", "cluster"));
  if (fs::is_regular_file(run_dir / "diversity/trend.csv")) {
    write_file(plot_dir / "fd_trend.csv", read_file(run_dir / "diversity/trend.csv"));
  }
}

}  // namespace meshforge
