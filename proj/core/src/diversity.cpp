#include "meshforge/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "format.hpp"
#include "json.hpp"
#include "meshforge/error.hpp"

namespace meshforge {

std::optional<double> diversity_matrix(std::span<const std::uint32_t> counts) {
  // Zero rows and columns contribute nothing, so the outer product is built
  // over the support only.
  std::vector<double> c;
  for (auto v : counts) {
    if (v != 0) c.push_back(static_cast<double>(v));
  }
  if (c.empty()) return std::nullopt;
  const auto d = c.size();
  std::vector<double> upper(d * d, 0.0);
  double norm = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      upper[i * d + j] = c[i] * c[j];
      norm += upper[i * d + j];
    }
  }
  double trace = 0;
  for (std::size_t i = 0; i < d; ++i) trace += upper[i * d + i] / norm;
  return 1.0 - trace;
}

std::optional<double> diversity_closed_form(std::span<const std::uint32_t> counts) {
  double n = 0, sq = 0;
  for (auto v : counts) {
    n += v;
    sq += static_cast<double>(v) * v;
  }
  if (n == 0) return std::nullopt;
  return (n * n - sq) / (n * n + sq);
}

bool f_x(const SAVector& sa1, std::span<const std::string> labels, ConvergenceMode mode,
         const ConvergenceThresholds& thresholds) {
  if (sa1.level != 1) throw Error("convergence flags need a level-1 vector");
  if (labels.size() != sa1.counts.size()) throw Error("label count does not match vector");
  double total = 0, core = 0, j = 0, l = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = sa1.counts[i];
    total += v;
    if (labels[i].size() != 1) continue;
    switch (labels[i][0]) {
      case 'A':
      case 'B':
      case 'C':
      case 'D':
      case 'E':
      case 'G':
        core += v;
        break;
      case 'J':
        j += v;
        break;
      case 'L':
        l += v;
        break;
      default:
        break;
    }
  }
  if (total == 0) return false;
  if (core / total < thresholds.core_min) return false;
  switch (mode) {
    case ConvergenceMode::kJ:
      return j / total >= thresholds.flag_min;
    case ConvergenceMode::kL:
      return l / total >= thresholds.flag_min;
    case ConvergenceMode::kJL:
      if (thresholds.strict_jl) return j / total >= thresholds.flag_min && l / total >= thresholds.flag_min;
      return j > 0 && l > 0 && (j + l) / total >= thresholds.flag_min;
  }
  return false;
}

void FractionCounter::add(int year, bool flagged) {
  auto& [f, t] = counts_[year];
  f += flagged ? 1 : 0;
  ++t;
}

void FractionCounter::merge(const FractionCounter& other) {
  for (const auto& [year, ft] : other.counts_) {
    auto& mine = counts_[year];
    mine.first += ft.first;
    mine.second += ft.second;
  }
}

std::vector<YearFraction> FractionCounter::series() const {
  std::vector<YearFraction> out;
  for (const auto& [year, ft] : counts_) {
    if (ft.second > 0) out.push_back({year, ft.first, ft.second});
  }
  return out;
}

std::vector<YearFraction> yearly_fraction(std::span<const std::pair<int, bool>> flags) {
  FractionCounter c;
  for (const auto& [year, flagged] : flags) c.add(year, flagged);
  return c.series();
}

TeamGroup team_group(int author_count) noexcept {
  if (author_count == 1) return TeamGroup::kSolo;
  if (author_count >= 2 && author_count <= 5) return TeamGroup::kSmall;
  if (author_count >= 6 && author_count <= 10) return TeamGroup::kMedium;
  if (author_count >= 11 && author_count <= 50) return TeamGroup::kLarge;
  return TeamGroup::kUnknown;
}

const char* to_string(TeamGroup group) noexcept {
  switch (group) {
    case TeamGroup::kSolo:
      return "solo";
    case TeamGroup::kSmall:
      return "small";
    case TeamGroup::kMedium:
      return "medium";
    case TeamGroup::kLarge:
      return "large";
    case TeamGroup::kUnknown:
      return "unknown";
  }
  return "unknown";
}

TrendFit trend_fit(std::span<const std::pair<int, double>> series, double center) {
  if (series.size() < 4) throw Error("cubic trend fit needs at least 4 points");
  std::vector<double> x, y;
  for (const auto& [year, value] : series) {
    x.push_back(year);
    y.push_back(value);
  }
  TrendFit t;
  t.center = center;
  t.fit = polynomial_fit(x, y, 3, center);
  t.a = t.fit.coefficients[0];
  t.b = t.fit.coefficients[1];
  t.c = t.fit.coefficients[2];
  t.d = t.fit.coefficients[3];
  t.residual_variance = t.fit.residual_variance;
  t.points = series.size();
  return t;
}

void GroupStats::add(double value, std::size_t bin_count) {
  ++count;
  sum += value;
  sum_sq += value * value;
  if (bins.size() != bin_count) bins.resize(bin_count, 0);
  if (value == 0) {
    ++zeros;
    return;
  }
  auto b = static_cast<std::size_t>(value * static_cast<double>(bin_count));
  ++bins[std::min(b, bin_count - 1)];
}

void GroupStats::merge(const GroupStats& other) {
  count += other.count;
  sum += other.sum;
  sum_sq += other.sum_sq;
  zeros += other.zeros;
  if (bins.size() < other.bins.size()) bins.resize(other.bins.size(), 0);
  for (std::size_t i = 0; i < other.bins.size(); ++i) bins[i] += other.bins[i];
}

double GroupStats::stddev() const {
  if (count == 0) return 0.0;
  const double m = mean();
  const double var = sum_sq / static_cast<double>(count) - m * m;
  return var > 0 ? std::sqrt(var) : 0.0;
}

DiversityAggregator::DiversityAggregator(AggregateKey key, int window_years, int anchor_year, std::size_t bins)
    : key_(key), window_(window_years), anchor_(anchor_year), bins_(bins) {
  if (window_years < 1) throw ConfigError("aggregation window must be at least one year");
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
}

int DiversityAggregator::window_start(int year) const {
  const int offset = year - anchor_;
  const int q = offset >= 0 ? offset / window_ : -((-offset + window_ - 1) / window_);
  return anchor_ + q * window_;
}

void DiversityAggregator::add(const DiversityRecord& record) {
  GroupKey k;
  switch (key_) {
    case AggregateKey::kYear:
      k.year = window_start(record.year);
      break;
    case AggregateKey::kJournal:
      k.journal = record.journal;
      break;
    case AggregateKey::kTeamYear:
      k.year = window_start(record.year);
      k.team = record.team;
      break;
  }
  groups_[k].add(record.f_d, bins_);
}

void DiversityAggregator::merge(const DiversityAggregator& other) {
  if (other.key_ != key_ || other.window_ != window_ || other.anchor_ != anchor_ || other.bins_ != bins_) {
    throw Error("cannot merge differently configured aggregators");
  }
  for (const auto& [k, s] : other.groups_) groups_[k].merge(s);
}

std::vector<JournalRank> journal_ranking(const DiversityAggregator& by_journal, std::uint64_t min_articles) {
  if (by_journal.key() != AggregateKey::kJournal) throw Error("journal ranking needs journal-keyed statistics");
  std::vector<JournalRank> out;
  for (const auto& [k, s] : by_journal.groups()) {
    if (s.count >= min_articles) out.push_back({k.journal, s.mean(), s.count});
  }
  std::stable_sort(out.begin(), out.end(), [](const JournalRank& a, const JournalRank& b) {
    if (a.mean_f_d != b.mean_f_d) return a.mean_f_d > b.mean_f_d;
    return a.journal < b.journal;
  });
  return out;
}

void write_diversity_header(std::ostream& out) {
  detail::write_schema_line(out, "diversity");
  out << "pmid,year,journal,team_group,f_d,level\n";
}

void write_diversity_row(std::ostream& out, const DiversityRecord& r) {
  out << detail::csv_field(r.pmid) << ',' << r.year << ',' << detail::csv_field(r.journal) << ',' << to_string(r.team)
      << ',' << detail::num(r.f_d) << ',' << r.level << '\n';
}

namespace {

std::string key_columns(const GroupKey& k, AggregateKey key) {
  switch (key) {
    case AggregateKey::kYear:
      return std::to_string(k.year);
    case AggregateKey::kJournal:
      return detail::csv_field(k.journal);
    case AggregateKey::kTeamYear:
      return std::string(to_string(*k.team)) + "," + std::to_string(k.year);
  }
  return {};
}

std::string key_header(AggregateKey key) {
  switch (key) {
    case AggregateKey::kYear:
      return "window_start";
    case AggregateKey::kJournal:
      return "journal";
    case AggregateKey::kTeamYear:
      return "team_group,window_start";
  }
  return {};
}

}  // namespace

void write_group_stats_csv(std::ostream& out, const DiversityAggregator& agg) {
  detail::write_schema_line(out, "diversity-stats");
  out << key_header(agg.key()) << ",window_years,mean,std,count\n";
  for (const auto& [k, s] : agg.groups()) {
    out << key_columns(k, agg.key()) << ',' << agg.window_years() << ',' << detail::num(s.mean()) << ','
        << detail::num(s.stddev()) << ',' << s.count << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const DiversityAggregator& agg) {
  detail::write_schema_line(out, "diversity-histogram");
  out << key_header(agg.key()) << ",bin_low,bin_high,count\n";
  const double width = 1.0 / static_cast<double>(agg.bin_count());
  for (const auto& [k, s] : agg.groups()) {
    const auto cols = key_columns(k, agg.key());
    out << cols << ",0,0," << s.zeros << '\n';
    for (std::size_t b = 0; b < agg.bin_count(); ++b) {
      const auto c = b < s.bins.size() ? s.bins[b] : 0;
      out << cols << ',' << detail::num(b * width) << ',' << detail::num((b + 1) * width) << ',' << c << '\n';
    }
  }
}

void write_journal_ranking_csv(std::ostream& out, std::span<const JournalRank> ranking) {
  detail::write_schema_line(out, "journal-ranking");
  out << "rank,journal,mean_f_d,article_count\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    out << i + 1 << ',' << detail::csv_field(ranking[i].journal) << ',' << detail::num(ranking[i].mean_f_d) << ','
        << ranking[i].article_count << '\n';
  }
}

void write_fraction_csv(std::ostream& out, const std::map<std::string, std::vector<YearFraction>>& series) {
  detail::write_schema_line(out, "convergence-fraction");
  out << "mode,year,flagged,total,fraction\n";
  for (const auto& [mode, rows] : series) {
    for (const auto& r : rows) {
      out << mode << ',' << r.year << ',' << r.flagged << ',' << r.total << ',' << detail::num(r.fraction()) << '\n';
    }
  }
}

std::string trend_to_json(const std::map<std::string, TrendFit>& fits) {
  nlohmann::ordered_json j;
  j["schema"] = detail::schema_id("trend-fit");
  j["model"] = "a + b*(t-center) + c*(t-center)^2 + d*(t-center)^3";
  auto groups = nlohmann::ordered_json::object();
  for (const auto& [name, f] : fits) {
    groups[name] = {{"center", f.center}, {"a", f.a},       {"b", f.b},
                    {"c", f.c},           {"d", f.d},       {"residual_variance", f.residual_variance},
                    {"points", f.points}, {"dof", f.fit.dof}};
  }
  j["groups"] = std::move(groups);
  return j.dump(2);
}

void write_trend_csv(std::ostream& out, const std::map<std::string, TrendFit>& fits,
                     const std::map<std::string, std::vector<std::pair<int, double>>>& observed) {
  detail::write_schema_line(out, "trend-values");
  out << "group,year,observed,fitted,ci99_low,ci99_high\n";
  for (const auto& [name, f] : fits) {
    auto it = observed.find(name);
    if (it == observed.end()) continue;
    for (const auto& [year, value] : it->second) {
      const double fitted = f.evaluate(year);
      const double half = f.band(year, 0.99);
      out << name << ',' << year << ',' << detail::num(value) << ',' << detail::num(fitted) << ','
          << detail::num(fitted - half) << ',' << detail::num(fitted + half) << '\n';
    }
  }
}

}  // namespace meshforge
