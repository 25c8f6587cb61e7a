// meshforge: command-line driver for the co-occurrence pipeline.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "meshforge/digest.hpp"
#include "meshforge/error.hpp"
#include "meshforge/pipeline.hpp"
#include "meshforge/synthgen.hpp"

namespace fs = std::filesystem;
using namespace meshforge;

namespace {

enum Exit { kOk = 0, kConfig = 2, kParse = 3, kStage = 4 };

struct Globals {
  std::string config;
  std::string out_dir;
  std::string cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string log_level = "info";
  std::vector<std::string> corpus;
  std::string ontology;
};

PipelineConfig make_config(const Globals& g) {
  auto c = g.config.empty() ? PipelineConfig{} : PipelineConfig::load(g.config);
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  if (!g.cache_dir.empty()) c.cache_dir = g.cache_dir;
  if (g.seed) c.louvain.seed = *g.seed;
  if (g.jobs) c.jobs = *g.jobs;
  if (!g.corpus.empty()) c.corpus.assign(g.corpus.begin(), g.corpus.end());
  if (!g.ontology.empty()) c.ontology = g.ontology;
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

void summarize(const RunReport& r) {
  for (const auto& s : r.stages) {
    fmt::print("{:<11} {:<9} {:>7.2f}s  {} files\n", s.name, s.cache_hit ? "cached" : "computed", s.seconds, s.files);
  }
  fmt::print("articles: {} read, {} kept\n", r.ingest.articles_read, r.ingest.articles_kept);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshforge: subject-heading co-occurrence networks, bridges and diversity"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the command
  app.set_version_flag("--version", MESHFORGE_VERSION);

  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--cache-dir", g.cache_dir, "stage cache directory");
  app.add_option("--seed", g.seed, "clustering seed");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // ontology
  auto* ontology = app.add_subcommand("ontology", "parse a descriptor file (TSV or NLM XML)");
  std::string ont_input, branches{kDefaultBranches};
  ontology->add_option("input", ont_input, "descriptor file")->required()->check(CLI::ExistingFile);
  ontology->add_option("--branches", branches, "retained branch letters");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "filter and normalize a corpus JSONL file");
  std::string ingest_input, mesh_mode = "major";
  std::vector<int> ingest_years;
  bool fail_fast = false;
  ingest->add_option("input", ingest_input, "corpus JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--mesh", mesh_mode, "major|all")->check(CLI::IsMember({"major", "all"}));
  ingest->add_option("--years", ingest_years, "first and last year")->expected(2);
  ingest->add_flag("--fail-fast", fail_fast, "stop at the first malformed line");

  // fetch
  auto* fetch = app.add_subcommand("fetch", "retrieve PubMed records through E-utilities");
  std::string ids_file, base_url;
  std::vector<int> fetch_years;
  double rate = 3.0;
  fetch->add_option("--ids", ids_file, "file with one PMID per line")->check(CLI::ExistingFile);
  fetch->add_option("--years", fetch_years, "publication year range")->expected(2);
  fetch->add_option("--rate", rate, "requests per second")->check(CLI::PositiveNumber);
  fetch->add_option("--base-url", base_url, "E-utilities base URL");

  // pipeline stages
  auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--corpus", g.corpus, "corpus JSONL (overrides config)");
    sub->add_option("--ontology", g.ontology, "descriptor file (overrides config)");
  };
  auto* cooccur = app.add_subcommand("cooccur", "annual and period co-occurrence matrices");
  auto* cluster = app.add_subcommand("cluster", "modularity clustering of the matrices");
  auto* bridges = app.add_subcommand("bridges", "bridge scores, rank series and emerging bridges");
  auto* diversity = app.add_subcommand("diversity", "per-article diversity, f_X series and trend fits");
  auto* continuity = app.add_subcommand("continuity", "stable cliques and cluster continuity");
  auto* run = app.add_subcommand("run", "full pipeline");
  for (auto* sub : {cooccur, cluster, bridges, diversity, continuity, run}) add_inputs(sub);

  auto* plot = app.add_subcommand("export-plotdata", "figure-ready data from a finished run");
  std::string run_dir, plot_dir;
  plot->add_option("--run-dir", run_dir, "run output directory (default: --out-dir)");
  plot->add_option("--plot-dir", plot_dir, "destination (default: <run-dir>/plotdata)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted structure");
  std::string spec_file;
  synth->add_option("--spec", spec_file, "JSON generator spec")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  auto logger = spdlog::stderr_color_mt("meshforge");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_pattern("%^%l%$: %v");

  try {
    const fs::path out = g.out_dir.empty() ? fs::path("meshforge-out") : fs::path(g.out_dir);

    if (*ontology) {
      const auto tree = load_ontology(ont_input, BranchSet::parse(branches));
      const auto& s = tree.stats();
      std::ostringstream tsv;
      write_ontology_tsv(tsv, tree);
      write_text(out / "ontology.tsv", tsv.str());
      write_text(out / "ontology.sha256", sha256_hex(tsv.str()) + "  ontology.tsv\n");
      nlohmann::ordered_json j;
      j["schema"] = "meshforge.ontology-stats.v1";
      j["source"] = ont_input;
      j["branches"] = tree.branch_filter().letters();
      j["descriptors_read"] = s.descriptors_read;
      j["descriptors_kept"] = s.descriptors_kept;
      j["descriptors_dropped"] = s.descriptors_dropped;
      j["locators_pruned"] = s.locators_pruned;
      j["top_node_locators"] = s.top_node_locators;
      j["l2_headings"] = tree.dimension(2);
      write_text(out / "ontology_stats.json", j.dump(2) + "\n");
      fmt::print("{} descriptors kept ({} dropped), {} L2 headings\n", s.descriptors_kept, s.descriptors_dropped,
                 tree.dimension(2));
      return kOk;
    }

    if (*ingest) {
      IngestOptions opt;
      if (!g.config.empty()) opt = PipelineConfig::load(g.config).ingest;
      opt.filter = mesh_mode == "major" ? MeshFilter::kMajorOnly : MeshFilter::kAll;
      if (!ingest_years.empty()) opt.years = {ingest_years[0], ingest_years[1]};
      if (fail_fast) opt.on_error = ErrorPolicy::kFailFast;
      fs::create_directories(out);
      std::ofstream dest(out / "corpus.jsonl", std::ios::binary | std::ios::trunc);
      const auto stats = ingest_file(ingest_input, opt, [&](ArticleRecord&& r) { dest << to_jsonl(r) << '\n'; });
      fmt::print("{} read, {} kept, {} malformed, {} without major MeSH, {} out of range, {} by publication type\n",
                 stats.articles_read, stats.articles_kept, stats.malformed_lines, stats.dropped_no_major_mesh,
                 stats.dropped_out_of_range, stats.dropped_pub_type);
      return kOk;
    }

    if (*fetch) {
      if (ids_file.empty() == fetch_years.empty()) throw ConfigError("fetch needs exactly one of --ids or --years");
      RemoteConfig rc;
      rc.rate_per_second = rate;
      if (!base_url.empty()) rc.base_url = base_url;
      if (!g.cache_dir.empty()) rc.cache_dir = fs::path(g.cache_dir) / "remote";
      PubMedClient client(rc);
      fs::create_directories(out);
      std::ofstream dest(out / "fetched.jsonl", std::ios::binary | std::ios::trunc);
      auto sink = [&](ArticleRecord&& r) { dest << to_jsonl(r) << '\n'; };
      FetchStats stats;
      if (!ids_file.empty()) {
        std::ifstream in(ids_file);
        std::vector<std::string> ids;
        for (std::string line; std::getline(in, line);) {
          if (!line.empty()) ids.push_back(line);
        }
        stats = client.fetch_ids(ids, sink);
      } else {
        stats = client.fetch_range(fetch_years[0], fetch_years[1], sink);
      }
      fmt::print("{} records ({} requests, {} cache hits, {} retries, {} unparsable)\n", stats.records, stats.requests,
                 stats.cache_hits, stats.retries, stats.parse_failures);
      return kOk;
    }

    if (*plot) {
      const fs::path from = run_dir.empty() ? out : fs::path(run_dir);
      const fs::path to = plot_dir.empty() ? from / "plotdata" : fs::path(plot_dir);
      export_plotdata(from, to);
      fmt::print("plot data written to {}\n", to.string());
      return kOk;
    }

    if (*synth) {
      PlantedSpec spec;
      if (!spec_file.empty()) {
        std::ifstream in(spec_file);
        std::stringstream ss;
        ss << in.rdbuf();
        spec = spec_from_json(ss.str());
      }
      const auto files = generate_files(spec, out);
      fmt::print("{} articles -> {}\n", files.articles, files.corpus.string());
      return kOk;
    }

    std::set<Stage> stages;
    if (*cooccur) stages = {Stage::kScan};
    if (*cluster) stages = {Stage::kCluster};
    if (*bridges) stages = {Stage::kBridges};
    if (*diversity) stages = {Stage::kScan, Stage::kTrend};
    if (*continuity) stages = {Stage::kContinuity};
    Pipeline pipeline(make_config(g));
    const auto report = *run ? pipeline.run() : pipeline.run(stages);
    summarize(report);
    return kOk;
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const ParseError& e) {
    spdlog::error("parse: {}", e.what());
    return kParse;
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return kStage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kStage;
  }
}
