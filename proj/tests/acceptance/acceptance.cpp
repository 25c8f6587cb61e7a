// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Criteria 10 and 11 drive the command-line tool as a child process.

#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <fcntl.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "meshforge/bridges.hpp"
#include "meshforge/clusters.hpp"
#include "meshforge/cooccur.hpp"
#include "meshforge/diversity.hpp"
#include "meshforge/error.hpp"
#include "meshforge/ontology.hpp"
#include "meshforge/stats.hpp"
#include "meshforge/synthgen.hpp"
#include "oracles.hpp"
#include "synth_analysis.hpp"

extern char** environ;

using namespace meshforge;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = MESHFORGE_FIXTURES;
const std::string kCli = MESHFORGE_CLI;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0 && s > budget_s) {
    o.pass = false;
    o.detail += " [over time budget]";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %s (%.2f s%s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), s,
              budget_s > 0 ? (", budget " + std::to_string(static_cast<int>(budget_s)) + " s").c_str() : "",
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct ChildRun {
  int exit_code = -1;
  double seconds = 0;
  long max_rss_kb = 0;
};

// Runs the CLI with stdout/stderr sent to `log`; peak RSS comes from wait4.
ChildRun run_cli(const std::vector<std::string>& args, const fs::path& log) {
  std::vector<std::string> argv_s{kCli};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&actions, 1, 2);

  ChildRun r;
  const auto start = std::chrono::steady_clock::now();
  pid_t pid = 0;
  if (posix_spawn(&pid, kCli.c_str(), &actions, nullptr, argv.data(), environ) != 0) {
    posix_spawn_file_actions_destroy(&actions);
    throw std::runtime_error("cannot spawn " + kCli);
  }
  int status = 0;
  struct rusage usage {};
  wait4(pid, &status, 0, &usage);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  posix_spawn_file_actions_destroy(&actions);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.max_rss_kb = usage.ru_maxrss;
  return r;
}

std::map<std::string, std::string> tree_of(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

std::vector<std::string> labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("N" + std::to_string(i));
  return out;
}

// ---------------------------------------------------------------------------

Outcome c1_obesity() {
  auto tree = load_ontology(kFixtures + "/ontology_small.tsv", BranchSet::defaults());
  auto l1 = project_l1(tree, "D009765");
  auto l2 = project_l2(tree, "D009765");
  std::map<std::string, std::uint32_t> got1, got2;
  for (std::size_t i = 0; i < l1.counts.size(); ++i) {
    if (l1.counts[i]) got1[tree.l1_labels()[i]] = l1.counts[i];
  }
  for (std::size_t i = 0; i < l2.counts.size(); ++i) {
    if (l2.counts[i]) got2[tree.l2_index()[i]] = l2.counts[i];
  }
  const std::map<std::string, std::uint32_t> want1{{"C", 2}, {"E", 1}, {"G", 1}};
  const std::map<std::string, std::uint32_t> want2{{"C18", 1}, {"C23", 1}, {"E01", 1}, {"G07", 1}};
  std::string d = "L1 {";
  for (const auto& [k, v] : got1) d += k + ":" + std::to_string(v) + " ";
  d += "} L2 {";
  for (const auto& [k, v] : got2) d += k + " ";
  d += "}";
  return {got1 == want1 && got2 == want2, d};
}

Outcome c2_worked() {
  std::vector<std::uint32_t> a{1, 2, 0, 0, 1, 0}, b{0, 4, 0, 0, 0, 0}, u(10, 1);
  const double fa = *diversity_closed_form(a), fb = *diversity_closed_form(b), fu = *diversity_closed_form(u);
  const double ma = *diversity_matrix(a), mb = *diversity_matrix(b), mu = *diversity_matrix(u);
  const bool ok = fa == 5.0 / 11 && fb == 0.0 && fu == 9.0 / 11 && std::abs(ma - 5.0 / 11) < 1e-15 && mb == 0.0 &&
                  std::abs(mu - 9.0 / 11) < 1e-15;
  return {ok, "5/11 -> " + fmt_double(fa) + ", 0 -> " + fmt_double(fb) + ", 9/11 -> " + fmt_double(fu)};
}

Outcome c3_diversity_props() {
  std::mt19937_64 rng(31337);
  double worst_paths = 0, worst_blau = 0;
  std::size_t bound_violations = 0, max_violations = 0;
  for (int t = 0; t < 100000; ++t) {
    const std::size_t d = 1 + rng() % 40;
    std::vector<std::uint32_t> c(d);
    for (auto& x : c) x = rng() % 2 ? 0 : static_cast<std::uint32_t>(rng() % 12);
    c[rng() % d] += 1;
    const double f = *diversity_closed_form(c);
    worst_paths = std::max(worst_paths, std::abs(*diversity_matrix(c) - f));
    double n = 0, s = 0;
    for (auto x : c) n += x;
    for (auto x : c) s += (x / n) * (x / n);
    const double blau = 1 - s;
    worst_blau = std::max(worst_blau, std::abs(f - blau / (2 - blau)));
    const double bound = diversity_bound(d);
    if (f < 0 || f > bound + 1e-15) ++bound_violations;
    std::vector<std::uint32_t> even(d, 1 + static_cast<std::uint32_t>(rng() % 5));
    const double fe = *diversity_closed_form(even);
    if (std::abs(fe - bound) > 1e-15 || f > fe + 1e-15) ++max_violations;
  }
  const bool ok = worst_paths <= 1e-12 && worst_blau <= 1e-12 && bound_violations == 0 && max_violations == 0;
  return {ok, "max |matrix-closed| " + fmt_double(worst_paths) + ", max Blau error " + fmt_double(worst_blau) +
                  ", bound violations " + std::to_string(bound_violations) + ", maximality violations " +
                  std::to_string(max_violations)};
}

Outcome c4_normalization() {
  PlantedSpec spec;
  spec.first_year = spec.last_year = spec.trend_center = 2000;
  spec.articles_per_year = 10000;
  spec.seed = 4;
  SyntheticCorpus corpus(spec);
  const auto tree = corpus.ontology();
  std::vector<SAVector> arts;
  corpus.generate([&](ArticleRecord&& r) {
    std::vector<std::string> ids;
    for (const auto& m : r.mesh) {
      if (m.major) ids.push_back(m.id);
    }
    arts.push_back(article_sa(tree, ids, 2));
  });
  const auto dim = tree.dimension(2);
  CoocAccumulator seq(2, dim);
  for (const auto& a : arts) seq.add(a);
  auto whole = seq.finish(tree.l2_index(), {2000, 2000});

  // uneven contiguous shards, merged in order
  std::vector<CoocAccumulator> shards;
  std::size_t pos = 0;
  std::mt19937_64 rng(9);
  while (pos < arts.size()) {
    const std::size_t len = std::min(arts.size() - pos, static_cast<std::size_t>(1 + rng() % 1500));
    CoocAccumulator acc(2, dim);
    for (std::size_t i = pos; i < pos + len; ++i) acc.add(arts[i]);
    shards.push_back(std::move(acc));
    pos += len;
  }
  CoocAccumulator merged(2, dim);
  for (const auto& s : shards) merged.merge(s);
  auto m = merged.finish(tree.l2_index(), {2000, 2000});

  // independent dense oracle for the mass
  std::vector<std::vector<std::uint32_t>> raw;
  for (const auto& a : arts) raw.push_back(a.counts);
  const auto dense = oracle::cooccurrence(raw, dim);
  double oracle_mass = 0, worst_cell = 0, worst_oracle = 0;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    oracle_mass += dense[i];
    worst_cell = std::max(worst_cell, std::abs(m.weights()[i] - whole.weights()[i]));
    worst_oracle = std::max(worst_oracle, std::abs(whole.weights()[i] - dense[i]));
  }
  const double mass_err = std::abs(whole.total_mass() - static_cast<double>(arts.size()));
  const bool ok = arts.size() == 10000 && whole.article_count() == 10000 && mass_err <= 1e-9 && worst_cell <= 1e-12 &&
                  worst_oracle <= 1e-9;
  return {ok, std::to_string(arts.size()) + " articles, |mass - count| " + fmt_double(mass_err) + ", " +
                  std::to_string(shards.size()) + " shards max cell diff " + fmt_double(worst_cell) +
                  ", max diff vs dense oracle " + fmt_double(worst_oracle)};
}

Outcome c5_louvain() {
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_cert = 0, worst_gap_planted = -1e300;
  int planted = 0, planted_ok = 0, random_at_optimum = 0, random_total = 0;
  for (int g = 0; g < 50; ++g) {
    const std::size_t n = 3 + rng() % 6;
    std::vector<double> w(n * n, 0.0);
    const bool is_planted = g % 2 == 0;
    const std::size_t split = 1 + rng() % (n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double x;
        if (is_planted) {
          x = ((i < split) == (j < split)) ? 0.6 + 0.4 * u(rng) : 0.05 * u(rng);
        } else {
          x = u(rng) < 0.5 ? u(rng) : 0.0;
        }
        w[i * n + j] = w[j * n + i] = x / 2;
      }
      if (u(rng) < 0.3) w[i * n + i] = 0.5 * u(rng);
    }
    auto m = CoocMatrix::from_weights(2, labels(n), {2000, 2000}, w, 1);
    if (m.total_mass() == 0) continue;
    auto c = louvain(m);
    worst_cert = std::max(worst_cert, std::abs(c.modularity - oracle::modularity(w, n, c.assignment)));
    // exhaustive optimum over the present nodes (absent ones carry no weight)
    const double best = oracle::best_modularity(w, n);
    if (is_planted) {
      ++planted;
      worst_gap_planted = std::max(worst_gap_planted, best - c.modularity);
      if (c.modularity >= best - 1e-9) ++planted_ok;
    } else {
      ++random_total;
      if (c.modularity >= best - 1e-9) ++random_at_optimum;
    }
  }
  const bool ok = planted_ok == planted && worst_cert <= 1e-9;
  return {ok, "planted at optimum " + std::to_string(planted_ok) + "/" + std::to_string(planted) +
                  ", max certificate error " + fmt_double(worst_cert) + " over 50 graphs (other graphs at optimum " +
                  std::to_string(random_at_optimum) + "/" + std::to_string(random_total) + ")"};
}

Outcome c6_bridges() {
  std::vector<double> w(16, 0.0);
  auto link = [&](int a, int b, double x) { w[a * 4 + b] = w[b * 4 + a] = x / 2; };
  link(0, 1, 1), link(2, 3, 1), link(0, 2, 2), link(1, 2, 1);
  auto m = CoocMatrix::from_weights(2, labels(4), {2000, 2000}, w, 1);
  auto c = make_clustering(m, {0, 0, 1, 1}, {});
  auto s = bridge_scores(m, c);
  normalized_ranks(s, c);
  const bool fixture = s.beta[0] == 2.0 / 3 && s.beta[1] == 1.0 / 3 && s.beta[2] == 1.0 && s.beta[3] == 0.0 &&
                       s.norm_rank[2] == 0.5;

  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_oracle = 0, worst_scale = 0;
  std::size_t rank_changes = 0;
  for (int g = 0; g < 100; ++g) {
    const std::size_t n = 4 + rng() % 30;
    std::vector<double> x(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      x[i * n + i] = u(rng);
      for (std::size_t j = i + 1; j < n; ++j) {
        if (u(rng) < 0.35) x[i * n + j] = x[j * n + i] = u(rng);
      }
    }
    std::vector<int> a(n);
    const int k = 2 + static_cast<int>(rng() % 5);
    for (auto& v : a) v = static_cast<int>(rng() % k);
    auto mm = CoocMatrix::from_weights(2, labels(n), {2000, 2000}, x, 1);
    auto cc = make_clustering(mm, a, {});
    auto got = bridge_scores(mm, cc);
    normalized_ranks(got, cc);
    auto want = oracle::bridge_scores(x, n, cc.assignment);
    const double factor = 0.001 + 1000 * u(rng);
    auto scaled = bridge_scores(mm.scaled(factor), cc);
    normalized_ranks(scaled, cc);
    for (std::size_t i = 0; i < n; ++i) {
      worst_oracle = std::max(worst_oracle, std::abs(got.beta[i] - want[i]));
      worst_scale = std::max(worst_scale, std::abs(got.beta[i] - scaled.beta[i]));
    }
    if (scaled.rank != got.rank) ++rank_changes;
  }
  const bool ok = fixture && worst_oracle <= 1e-9 && worst_scale <= 1e-9;
  return {ok, std::string("fixture beta (") + fmt_double(s.beta[0]) + ", " + fmt_double(s.beta[1]) + ", " +
                  fmt_double(s.beta[2]) + ", " + fmt_double(s.beta[3]) + "), R3 " + fmt_double(s.norm_rank[2]) +
                  "; 100 graphs max oracle diff " + fmt_double(worst_oracle) + ", max rescale diff " +
                  fmt_double(worst_scale) + ", rank changes under rescale " + std::to_string(rank_changes)};
}

Outcome c7_emerging() {
  PlantedSpec spec;  // 1970-2018, 3 blocks of 12 headings
  spec.articles_per_year = 1000;
  spec.bridges = {{"B02", 0.0, 0.04}};
  auto r = testing::analyze(spec);
  std::string found;
  for (const auto& e : r.emerging) found += e.node + "(slope " + fmt_double(e.slope) + ", p " + fmt_double(e.p_value) +
                                            ", mean rank " + fmt_double(e.mean_rank) + ") ";
  const bool planted_ok = r.emerging.size() == 1 && r.emerging[0].node == "B02" &&
                          r.emerging[0].direction == TrendDirection::kRising;

  int clean = 0;
  for (int k = 0; k < 100; ++k) {
    PlantedSpec null_spec;
    null_spec.articles_per_year = 1000;
    null_spec.seed = 1000 + static_cast<std::uint64_t>(k);
    if (testing::analyze(null_spec).emerging.empty()) ++clean;
  }
  return {planted_ok && clean >= 95,
          "planted run detected [" + found + "]; no-bridge seeds clean " + std::to_string(clean) + "/100"};
}

Outcome c8_cliques() {
  std::size_t mismatches = 0, refinement_violations = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 1);
    const std::size_t n = 2 + rng() % 49;
    std::vector<Clustering> years;
    std::vector<std::vector<int>> raw;
    for (int y = 0; y < 10; ++y) {
      std::vector<int> a(n);
      const int k = 1 + static_cast<int>(rng() % 4);
      for (auto& x : a) x = rng() % 50 == 0 ? -1 : static_cast<int>(rng() % k);
      std::vector<double> w(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) w[i * n + i] = a[i] >= 0 ? 1 : 0;
      auto m = CoocMatrix::from_weights(2, labels(n), {2000 + y, 2000 + y}, w, 1);
      years.push_back(make_clustering(m, a, {}));
      raw.push_back(years.back().assignment);
    }
    auto cat = stable_cliques(years);
    std::set<std::set<std::size_t>> got;
    for (const auto& c : cat.cliques()) {
      got.insert(std::set<std::size_t>(c.begin(), c.end()));
      for (const auto& y : years) {
        for (auto m : c) {
          if (y.assignment[m] != y.assignment[c.front()]) ++refinement_violations;
        }
      }
    }
    if (got != oracle::always_together(raw, n)) ++mismatches;
  }
  const double same = jaccard_distance({1, 2}, {1, 2});
  const double partial = jaccard_distance({1, 2}, {1, 3});
  const double disjoint = jaccard_distance({1, 2}, {3, 4});
  const bool worked = same == 0.0 && partial == 1.0 - 1.0 / 3 && disjoint == 1.0;
  return {mismatches == 0 && refinement_violations == 0 && worked,
          "oracle mismatches " + std::to_string(mismatches) + "/100, refinement violations " +
              std::to_string(refinement_violations) + ", delta J {" + fmt_double(same) + ", " + fmt_double(partial) +
              ", " + fmt_double(disjoint) + "}"};
}

Outcome c9_trend() {
  const double truth[4] = {0.38, 3.1e-3, -4.2e-5, 6.5e-7};
  std::vector<std::pair<int, double>> series;
  for (int y = 1970; y <= 2018; ++y) {
    const double t = y - 1990.0;
    series.emplace_back(y, truth[0] + truth[1] * t + truth[2] * t * t + truth[3] * t * t * t);
  }
  auto fit = trend_fit(series, 1990);
  const double got[4] = {fit.a, fit.b, fit.c, fit.d};
  double worst = 0;
  for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(got[k] - truth[k]));

  std::vector<std::pair<int, double>> four{{1975, 0.31}, {1990, 0.44}, {2003, 0.40}, {2018, 0.57}};
  auto exact = trend_fit(four, 1990);
  double resid = 0;
  for (const auto& [y, v] : four) resid = std::max(resid, std::abs(exact.evaluate(y) - v));
  const bool ok = worst <= 1e-9 && exact.residual_variance == 0.0 && resid <= 1e-12;
  return {ok, "max coefficient error " + fmt_double(worst) + ", 4-point residual variance " +
                  fmt_double(exact.residual_variance) + ", max interpolation residual " + fmt_double(resid)};
}

Outcome c10_performance(const fs::path& work) {
  const auto data = work / "perf";
  const auto log = work / "perf.log";
  fs::remove_all(data);
  write_text(data / "spec.json",
             R"({"years": [1979, 2018], "articles_per_year": 25000, "bridges": [{"label": "B02", "rate_start": 0.0, "rate_end": 0.04}],
  "journals": [{"name": "J Low", "target_f_d": 0.2}, {"name": "J High", "target_f_d": 0.4}], "seed": 10})");
  auto gen = run_cli({"synth", "--spec", (data / "spec.json").string(), "--out-dir", (data / "corpus").string(),
                      "--log-level", "warn"},
                     log);
  if (gen.exit_code != 0) return {false, "synth failed, see " + log.string()};
  write_text(data / "run.json", R"({"corpus": "corpus/corpus.jsonl", "ontology": "corpus/ontology.tsv",
  "years": [1979, 2018], "periods": [[1979, 1989], [1990, 1999], [2000, 2009], [2010, 2018]],
  "out_dir": "out", "cache_dir": "cache"})");
  const auto jobs = std::to_string(std::max(1u, std::min(4u, std::thread::hardware_concurrency())));
  auto cold = run_cli({"run", "--config", (data / "run.json").string(), "--jobs", jobs, "--log-level", "warn"}, log);
  if (cold.exit_code != 0) return {false, "cold run failed, see " + log.string()};
  auto warm = run_cli({"run", "--config", (data / "run.json").string(), "--out-dir", (data / "out2").string(),
                       "--jobs", jobs, "--log-level", "warn"},
                      log);
  if (warm.exit_code != 0) return {false, "cached run failed, see " + log.string()};
  const double rss_mb = static_cast<double>(cold.max_rss_kb) / 1024.0;
  const bool ok = cold.seconds < 60 && rss_mb < 1024 && warm.seconds < 5;
  std::string detail = "1,000,000 articles with " + jobs + " job(s): cold " + fmt_double(cold.seconds) + " s, peak RSS " +
                       fmt_double(rss_mb) + " MB; cached rerun " + fmt_double(warm.seconds) + " s";
  if (ok) fs::remove_all(data);
  return {ok, detail};
}

Outcome c11_reproducible(const fs::path& work) {
  const auto data = work / "repro";
  const auto log = work / "repro.log";
  fs::remove_all(data);
  write_text(data / "spec.json", R"({"years": [1990, 2018], "articles_per_year": 1500,
  "bridges": [{"label": "B02", "rate_start": 0.0, "rate_end": 0.05}], "journals": [{"name": "J A", "target_f_d": 0.3}],
  "seed": 11})");
  if (run_cli({"synth", "--spec", (data / "spec.json").string(), "--out-dir", (data / "corpus").string()}, log)
          .exit_code != 0) {
    return {false, "synth failed"};
  }
  // identical manifests: same config file, separate fresh caches and output dirs
  write_text(data / "run.json", R"({"corpus": "corpus/corpus.jsonl", "ontology": "corpus/ontology.tsv",
  "years": [1990, 2018], "periods": [[1990, 1999], [2000, 2009], [2010, 2018]]})");
  for (const char* tag : {"a", "b"}) {
    auto r = run_cli({"run", "--config", (data / "run.json").string(), "--out-dir", (data / tag).string(),
                      "--cache-dir", (data / (std::string("cache-") + tag)).string()},
                     log);
    if (r.exit_code != 0) return {false, std::string("run ") + tag + " failed"};
  }
  auto a = tree_of(data / "a"), b = tree_of(data / "b");
  // manifests record wall times; their configuration parts must match
  const auto strip = [](std::string m) {
    auto pos = m.find("\"stages\"");
    return pos == std::string::npos ? m : m.substr(0, pos);
  };
  const bool manifests_match = strip(a["manifest.json"]) == strip(b["manifest.json"]);
  a.erase("manifest.json");
  b.erase("manifest.json");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  const bool ok = manifests_match && a.size() == b.size() && differing == 0 && !a.empty();
  if (ok) fs::remove_all(data);
  return {ok, std::to_string(a.size()) + " export files compared, " + std::to_string(differing) +
                  " differ; manifest configuration " + (manifests_match ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "meshforge_acceptance";
  fs::create_directories(work);

  criterion(1, "obesity projection", 1, c1_obesity);
  criterion(2, "diversity worked examples", 1, c2_worked);
  criterion(3, "diversity property suite", 10, c3_diversity_props);
  criterion(4, "co-occurrence normalization", 10, c4_normalization);
  criterion(5, "louvain oracle", 60, c5_louvain);
  criterion(6, "bridge oracle", 30, c6_bridges);
  criterion(7, "emerging-bridge recovery", 300, c7_emerging);
  criterion(8, "clique continuity", 30, c8_cliques);
  criterion(9, "trend fit", 1, c9_trend);
  criterion(10, "performance", 0, [&] { return c10_performance(work); });
  criterion(11, "reproducibility", 0, [&] { return c11_reproducible(work); });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
