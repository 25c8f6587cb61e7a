#include "meshforge/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "format.hpp"
#include "json.hpp"
#include "meshforge/diversity.hpp"
#include "meshforge/error.hpp"

namespace meshforge {

namespace {

// splitmix64: small, fast and identical on every platform.
std::uint64_t next_u64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) { return static_cast<double>(next_u64(state) >> 11) * 0x1.0p-53; }

std::size_t uniform_index(std::uint64_t& state, std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    auto r = next_u64(state);
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

// Knuth's method; means here are small.
std::size_t poisson(std::uint64_t& state, double mean) {
  if (mean <= 0) return 0;
  const double limit = std::exp(-mean);
  double p = 1.0;
  std::size_t k = 0;
  while (true) {
    p *= uniform01(state);
    if (p <= limit) return k;
    ++k;
  }
}

std::size_t weighted_index(std::uint64_t& state, const std::vector<double>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  double u = uniform01(state) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

std::uint64_t year_seed(std::uint64_t seed, int year) {
  std::uint64_t s = seed ^ (0xA0761D6478BD642Full * static_cast<std::uint64_t>(year + 100000));
  return next_u64(s);
}

std::string heading_code(std::size_t k) {
  return fmt::format("{}{:02}", kDefaultBranches[k % kDefaultBranches.size()], k / kDefaultBranches.size() + 1);
}

std::string descriptor_id(std::size_t heading, std::size_t child) { return fmt::format("SD{:04}{:02}", heading, child); }

constexpr std::array<std::pair<int, int>, 5> kTeamRanges{{{1, 1}, {2, 5}, {6, 10}, {11, 50}, {0, 0}}};

}  // namespace

void PlantedSpec::validate() const {
  auto unit = [](double v, const char* what) {
    if (!(v >= 0 && v <= 1)) throw ConfigError(std::string(what) + " must lie in [0,1]");
  };
  if (first_year > last_year) throw ConfigError("synthetic year span is inverted");
  if (articles_per_year == 0) throw ConfigError("articles_per_year must be positive");
  unit(within_rate, "within_rate");
  if (!(popularity_decay > 0 && popularity_decay <= 1)) throw ConfigError("popularity_decay must lie in (0,1]");
  if (major_mean < 1) throw ConfigError("major_mean must be at least 1");
  if (minor_mean < 0) throw ConfigError("minor_mean must be non-negative");
  if (descriptors_per_heading == 0 || descriptors_per_heading > 99) {
    throw ConfigError("descriptors_per_heading must be in 1..99");
  }
  double team_total = 0;
  for (double w : team_weights) {
    if (w < 0) throw ConfigError("team weights must be non-negative");
    team_total += w;
  }
  if (team_total <= 0) throw ConfigError("team weights must not all be zero");
  for (const auto& b : bridges) {
    unit(b.rate_start, "bridge rate_start");
    unit(b.rate_end, "bridge rate_end");
  }
  for (const auto& j : journals) {
    if (!(j.weight > 0)) throw ConfigError("journal weights must be positive");
    if (!(j.target_f_d >= 0)) throw ConfigError("journal diversity targets must be non-negative");
  }
  if (blocks.empty() && (block_count == 0 || block_size == 0)) throw ConfigError("spec needs at least one block");
  if (blocks.empty() && block_count * block_size > kDefaultBranches.size() * 99) {
    throw ConfigError("too many generated headings");
  }
  const auto resolved = resolved_blocks();
  for (const auto& b : bridges) {
    const bool found = std::any_of(resolved.begin(), resolved.end(), [&](const auto& block) {
      return std::find(block.begin(), block.end(), b.label) != block.end();
    });
    if (!found) throw ConfigError("bridge '" + b.label + "' is not in any block");
  }
}

std::vector<std::vector<std::string>> PlantedSpec::resolved_blocks() const {
  if (!blocks.empty()) return blocks;
  std::vector<std::vector<std::string>> out;
  std::size_t k = 0;
  for (std::size_t b = 0; b < block_count; ++b) {
    out.emplace_back();
    for (std::size_t i = 0; i < block_size; ++i) out.back().push_back(heading_code(k++));
  }
  return out;
}

SyntheticCorpus::SyntheticCorpus(PlantedSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.journals.empty()) spec_.journals.push_back({"Synth J", 0.3, 1.0});

  blocks_ = spec_.resolved_blocks();
  std::set<std::string> seen;
  block_members_.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].empty()) throw ConfigError("empty block in spec");
    double pop = 1.0;
    for (const auto& label : blocks_[b]) {
      try {
        auto tn = TreeNumber::parse(label);
        if (tn.depth() != 1 || !BranchSet::defaults().contains(tn.branch())) throw std::invalid_argument("depth");
      } catch (const std::invalid_argument&) {
        throw ConfigError("block label '" + label + "' is not a retained L2 heading code");
      }
      if (!seen.insert(label).second) throw ConfigError("heading '" + label + "' appears in more than one block");
      block_members_[b].push_back(headings_.size());
      headings_.push_back(label);
      info_.push_back({b, pop, false});
      pop *= spec_.popularity_decay;
    }
  }
  if (blocks_.size() < 2 && spec_.within_rate < 1) {
    throw ConfigError("cross-block draws need at least two blocks");
  }
  for (const auto& bridge : spec_.bridges) {
    auto it = std::find(headings_.begin(), headings_.end(), bridge.label);
    if (it == headings_.end()) throw ConfigError("bridge '" + bridge.label + "' is not in any block");
    const auto h = static_cast<std::size_t>(it - headings_.begin());
    info_[h].bridge = true;
    bridge_heading_.push_back(h);
  }

  const double bound = diversity_bound(headings_.size());
  for (std::size_t j = 0; j < spec_.journals.size(); ++j) {
    const auto& journal = spec_.journals[j];
    if (journal.target_f_d > bound) {
      throw ConfigError(fmt::format("journal '{}' diversity target {} exceeds the bound {} for d = {}", journal.name,
                                    journal.target_f_d, bound, headings_.size()));
    }
    const std::uint64_t cal_seed = spec_.seed ^ 0x5DEECE66Dull;
    const std::size_t samples = 4000;
    const double high = simulate_mean_diversity(1.0, cal_seed, samples);
    if (journal.target_f_d > high + 1e-3) {
      throw ConfigError(fmt::format("journal '{}' diversity target {} is unreachable (maximum about {:.4f})",
                                    journal.name, journal.target_f_d, high));
    }
    double lo = 0, hi = 1;
    for (int it = 0; it < 40; ++it) {
      const double mid = (lo + hi) / 2;
      if (simulate_mean_diversity(mid, cal_seed, samples) < journal.target_f_d) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    mixing_.push_back((lo + hi) / 2);
  }
}

std::vector<std::size_t> SyntheticCorpus::draw_categories(std::uint64_t& state, std::size_t home, double mixing,
                                                          std::size_t count, bool allow_bridges) const {
  auto draw_from = [&](std::size_t block, bool include_bridges) {
    std::vector<double> w;
    const auto& members = block_members_[block];
    w.reserve(members.size());
    for (auto h : members) w.push_back(!include_bridges && info_[h].bridge ? 0.0 : info_[h].popularity);
    return members[weighted_index(state, w)];
  };
  std::vector<std::size_t> cats;
  cats.reserve(count);
  cats.push_back(draw_from(home, true));
  while (cats.size() < count) {
    if (uniform01(state) < mixing) {
      if (blocks_.size() < 2 || uniform01(state) < spec_.within_rate) {
        cats.push_back(draw_from(home, true));
      } else {
        auto other = uniform_index(state, blocks_.size() - 1);
        if (other >= home) ++other;
        cats.push_back(draw_from(other, allow_bridges));
      }
    } else {
      cats.push_back(cats[uniform_index(state, cats.size())]);
    }
  }
  return cats;
}

double SyntheticCorpus::simulate_mean_diversity(double mixing, std::uint64_t seed, std::size_t samples) const {
  std::uint64_t state = seed;
  std::vector<std::uint32_t> counts(headings_.size());
  double sum = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto home = uniform_index(state, blocks_.size());
    const auto count = 1 + poisson(state, spec_.major_mean - 1);
    std::fill(counts.begin(), counts.end(), 0);
    for (auto h : draw_categories(state, home, mixing, count, false)) ++counts[h];
    sum += *diversity_closed_form(counts);
  }
  return sum / static_cast<double>(samples);
}

void SyntheticCorpus::write_ontology_tsv(std::ostream& out) const {
  out << "# synthetic ontology: one heading descriptor per L2 code plus children\n";
  for (std::size_t h = 0; h < headings_.size(); ++h) {
    out << fmt::format("SH{:04}\tHeading {}\t{}\n", h, headings_[h], headings_[h]);
    for (std::size_t c = 0; c < spec_.descriptors_per_heading; ++c) {
      out << fmt::format("{}\tTopic {}.{:03}\t{}.{:03}\n", descriptor_id(h, c), headings_[h], c + 1, headings_[h], c + 1);
    }
  }
}

OntologyTree SyntheticCorpus::ontology() const {
  std::stringstream ss;
  write_ontology_tsv(ss);
  return parse_ontology_tsv(ss, BranchSet::defaults(), "synthetic");
}

void SyntheticCorpus::generate(const RecordSink& sink) const {
  for (int year = spec_.first_year; year <= spec_.last_year; ++year) generate_year(year, sink);
}

void SyntheticCorpus::generate_year(int year, const RecordSink& sink) const {
  std::uint64_t state = year_seed(spec_.seed, year);
  const double span = std::max(1, spec_.last_year - spec_.first_year);
  const double progress = (year - spec_.first_year) / span;
  std::vector<double> journal_weights, team_weights(spec_.team_weights.begin(), spec_.team_weights.end());
  for (const auto& j : spec_.journals) journal_weights.push_back(j.weight);

  for (std::size_t a = 0; a < spec_.articles_per_year; ++a) {
    ArticleRecord rec;
    rec.pmid = fmt::format("{}{:07}", year, a);
    rec.year = year;
    const auto j = weighted_index(state, journal_weights);
    rec.journal = spec_.journals[j].name;
    const auto group = weighted_index(state, team_weights);
    const auto [lo, hi] = kTeamRanges[group];
    rec.authors = lo + static_cast<int>(uniform_index(state, static_cast<std::size_t>(hi - lo + 1)));
    rec.pub_types = {"Journal Article"};

    const auto home = uniform_index(state, blocks_.size());
    const double mixing =
        std::clamp(mixing_[j] + spec_.diversity_trend * (year - spec_.trend_center), 0.0, 1.0);
    const auto count = 1 + poisson(state, spec_.major_mean - 1);
    auto cats = draw_categories(state, home, mixing, count, false);
    for (std::size_t b = 0; b < bridge_heading_.size(); ++b) {
      const auto h = bridge_heading_[b];
      if (info_[h].block == home) continue;
      const auto& bridge = spec_.bridges[b];
      const double rate = bridge.rate_start + (bridge.rate_end - bridge.rate_start) * progress;
      if (uniform01(state) < rate) cats.push_back(h);
    }
    for (auto h : cats) {
      rec.mesh.push_back({descriptor_id(h, uniform_index(state, spec_.descriptors_per_heading)), true});
    }
    const auto minors = poisson(state, spec_.minor_mean);
    for (std::size_t m = 0; m < minors; ++m) {
      const auto h = uniform_index(state, headings_.size());
      rec.mesh.push_back({descriptor_id(h, uniform_index(state, spec_.descriptors_per_heading)), false});
    }
    sink(std::move(rec));
  }
}

std::string SyntheticCorpus::ground_truth_json() const {
  nlohmann::ordered_json j;
  j["schema"] = detail::schema_id("ground-truth");
  j["seed"] = spec_.seed;
  j["years"] = {spec_.first_year, spec_.last_year};
  j["blocks"] = blocks_;
  auto bridges = nlohmann::ordered_json::array();
  for (const auto& b : spec_.bridges) {
    bridges.push_back({{"label", b.label}, {"rate_start", b.rate_start}, {"rate_end", b.rate_end}});
  }
  j["bridges"] = std::move(bridges);
  auto journals = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < spec_.journals.size(); ++i) {
    journals.push_back({{"name", spec_.journals[i].name},
                        {"target_f_d", spec_.journals[i].target_f_d},
                        {"mixing", mixing_[i]}});
  }
  j["journals"] = std::move(journals);
  j["diversity_trend"] = {{"center", spec_.trend_center}, {"mixing_slope_per_year", spec_.diversity_trend}};
  return j.dump(2);
}

PlantedSpec spec_from_json(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("synthetic spec is not a JSON object");
  static const std::set<std::string> known{"years", "articles_per_year", "blocks", "block_count", "block_size",
                                           "within_rate", "popularity_decay", "bridges", "journals", "major_mean",
                                           "minor_mean", "team_weights", "diversity_trend", "trend_center",
                                           "descriptors_per_heading", "seed"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ConfigError("synthetic spec: unknown key '" + item.key() + "'");
  }
  PlantedSpec s;
  try {
    if (j.contains("years")) {
      s.first_year = j["years"].at(0).get<int>();
      s.last_year = j["years"].at(1).get<int>();
    }
    s.articles_per_year = j.value("articles_per_year", s.articles_per_year);
    s.blocks = j.value("blocks", s.blocks);
    s.block_count = j.value("block_count", s.block_count);
    s.block_size = j.value("block_size", s.block_size);
    s.within_rate = j.value("within_rate", s.within_rate);
    s.popularity_decay = j.value("popularity_decay", s.popularity_decay);
    for (const auto& b : j.value("bridges", nlohmann::json::array())) {
      s.bridges.push_back({b.at("label").get<std::string>(), b.value("rate_start", 0.0), b.value("rate_end", 0.1)});
    }
    for (const auto& jr : j.value("journals", nlohmann::json::array())) {
      s.journals.push_back({jr.at("name").get<std::string>(), jr.value("target_f_d", 0.3), jr.value("weight", 1.0)});
    }
    s.major_mean = j.value("major_mean", s.major_mean);
    s.minor_mean = j.value("minor_mean", s.minor_mean);
    if (j.contains("team_weights")) {
      auto w = j["team_weights"].get<std::vector<double>>();
      if (w.size() != 5) throw ConfigError("team_weights needs 5 entries");
      std::copy(w.begin(), w.end(), s.team_weights.begin());
    }
    s.diversity_trend = j.value("diversity_trend", s.diversity_trend);
    s.trend_center = j.value("trend_center", s.trend_center);
    s.descriptors_per_heading = j.value("descriptors_per_heading", s.descriptors_per_heading);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string spec_to_json(const PlantedSpec& s) {
  nlohmann::ordered_json j;
  j["years"] = {s.first_year, s.last_year};
  j["articles_per_year"] = s.articles_per_year;
  if (!s.blocks.empty()) {
    j["blocks"] = s.blocks;
  } else {
    j["block_count"] = s.block_count;
    j["block_size"] = s.block_size;
  }
  j["within_rate"] = s.within_rate;
  j["popularity_decay"] = s.popularity_decay;
  auto bridges = nlohmann::ordered_json::array();
  for (const auto& b : s.bridges) {
    bridges.push_back({{"label", b.label}, {"rate_start", b.rate_start}, {"rate_end", b.rate_end}});
  }
  j["bridges"] = std::move(bridges);
  auto journals = nlohmann::ordered_json::array();
  for (const auto& jr : s.journals) {
    journals.push_back({{"name", jr.name}, {"target_f_d", jr.target_f_d}, {"weight", jr.weight}});
  }
  j["journals"] = std::move(journals);
  j["major_mean"] = s.major_mean;
  j["minor_mean"] = s.minor_mean;
  j["team_weights"] = s.team_weights;
  j["diversity_trend"] = s.diversity_trend;
  j["trend_center"] = s.trend_center;
  j["descriptors_per_heading"] = s.descriptors_per_heading;
  j["seed"] = s.seed;
  return j.dump(2);
}

GeneratedFiles generate_files(const PlantedSpec& spec, const std::filesystem::path& out_dir) {
  SyntheticCorpus corpus(spec);
  std::filesystem::create_directories(out_dir);
  GeneratedFiles files{out_dir / "corpus.jsonl", out_dir / "ontology.tsv", out_dir / "ground_truth.json", 0};
  {
    std::ofstream out(files.ontology, std::ios::binary | std::ios::trunc);
    corpus.write_ontology_tsv(out);
  }
  {
    std::ofstream out(files.ground_truth, std::ios::binary | std::ios::trunc);
    out << corpus.ground_truth_json() << '\n';
  }
  std::ofstream out(files.corpus, std::ios::binary | std::ios::trunc);
  std::string buffer;
  buffer.reserve(1 << 20);
  corpus.generate([&](ArticleRecord&& rec) {
    buffer += to_jsonl(rec);
    buffer.push_back('\n');
    ++files.articles;
    if (buffer.size() > (1 << 20) - 4096) {
      out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      buffer.clear();
    }
  });
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw Error("failed writing " + files.corpus.string());
  return files;
}

}  // namespace meshforge
