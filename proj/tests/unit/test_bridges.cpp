#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "meshforge/bridges.hpp"
#include "meshforge/error.hpp"
#include "oracles.hpp"

using namespace meshforge;

namespace {

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("H" + std::to_string(10 + i));
  return out;
}

// Clusters {1,2},{3,4}; cross weights W13 = 2, W23 = 1; some intra weight.
std::vector<double> four_node() {
  std::vector<double> w(16, 0.0);
  auto link = [&](int a, int b, double x) { w[a * 4 + b] = w[b * 4 + a] = x / 2; };
  link(0, 1, 5), link(2, 3, 4);
  link(0, 2, 2), link(1, 2, 1);
  return w;
}

struct Scored {
  CoocMatrix matrix;
  Clustering clustering;
  BridgeScores scores;
};

Scored score(const std::vector<double>& w, std::size_t n, const std::vector<int>& assignment) {
  Scored s;
  s.matrix = CoocMatrix::from_weights(2, names(n), {2000, 2000}, w, 1);
  s.clustering = make_clustering(s.matrix, assignment, {});
  s.scores = bridge_scores(s.matrix, s.clustering);
  normalized_ranks(s.scores, s.clustering);
  return s;
}

std::vector<BridgePoint> line(int first, int last, double rank0, double slope) {
  std::vector<BridgePoint> pts;
  for (int y = first; y <= last; ++y) {
    BridgePoint p;
    p.year = y;
    p.rank = static_cast<int>(std::lround(rank0 + slope * (y - first)));
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST(BridgeScores, FourNodeFixture) {
  auto s = score(four_node(), 4, {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(s.scores.beta[0], 2.0 / 3);
  EXPECT_DOUBLE_EQ(s.scores.beta[1], 1.0 / 3);
  EXPECT_DOUBLE_EQ(s.scores.beta[2], 1.0);
  EXPECT_EQ(s.scores.beta[3], 0.0);
  EXPECT_FALSE(s.scores.single_cluster);
}

TEST(BridgeScores, FourNodeRanks) {
  auto s = score(four_node(), 4, {0, 0, 1, 1});
  EXPECT_EQ(s.scores.rank[2], 1);
  EXPECT_DOUBLE_EQ(s.scores.norm_rank[2], 0.5);
  EXPECT_EQ(s.scores.rank[3], 2);
  EXPECT_EQ(s.scores.rank[0], 1);
  EXPECT_EQ(s.scores.rank[1], 2);
}

TEST(BridgeScores, InternalOnlyNodeIsZero) {
  auto w = four_node();
  auto s = score(w, 4, {0, 0, 1, 1});
  EXPECT_EQ(s.scores.beta[3], 0.0);
}

TEST(BridgeScores, UniformBipartiteGivesEqualScores) {
  const std::size_t n = 6;
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 3; j < 6; ++j) w[i * n + j] = w[j * n + i] = 0.25;
  }
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1;
  auto s = score(w, n, {0, 0, 0, 1, 1, 1});
  for (double b : s.scores.beta) EXPECT_NEAR(b, 1.0 / 3, 1e-15);
}

TEST(BridgeScores, TiesRankByLabelOrder) {
  const std::size_t n = 4;
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1;
  auto s = score(w, n, {0, 0, 0, 0});
  EXPECT_TRUE(s.scores.single_cluster);
  EXPECT_EQ(s.scores.rank, (std::vector<int>{1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(s.scores.norm_rank[0], 0.25);
  EXPECT_DOUBLE_EQ(s.scores.norm_rank[3], 1.0);
}

TEST(BridgeScores, GlobalScope) {
  auto s = score(four_node(), 4, {0, 0, 1, 1});
  normalized_ranks(s.scores, s.clustering, RankScope::kGlobal);
  EXPECT_EQ(s.scores.rank, (std::vector<int>{2, 3, 1, 4}));
  EXPECT_DOUBLE_EQ(s.scores.norm_rank[2], 0.25);
}

TEST(BridgeScores, EmptyClusteringThrows) {
  auto m = CoocMatrix::from_weights(2, names(2), {}, std::vector<double>(4, 0.0), 0);
  Clustering c;
  c.labels = names(2);
  c.assignment = {-1, -1};
  EXPECT_THROW(bridge_scores(m, c), Error);
}

class RandomClustered : public ::testing::TestWithParam<int> {};

TEST_P(RandomClustered, OracleScaleAndDecomposition) {
  std::mt19937_64 rng(GetParam());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 4 + rng() % 20;
  const int k = 2 + static_cast<int>(rng() % 4);
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    w[i * n + i] = u(rng);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (u(rng) < 0.4) w[i * n + j] = w[j * n + i] = u(rng);
    }
  }
  std::vector<int> a(n);
  for (auto& x : a) x = static_cast<int>(rng() % k);
  auto s = score(w, n, a);
  const auto& c = s.clustering.assignment;

  auto expect = oracle::bridge_scores(w, n, c);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(s.scores.beta[i], expect[i], 1e-9);
    EXPECT_GE(s.scores.beta[i], 0.0);
  }

  auto scaled = bridge_scores(s.matrix.scaled(37.5), s.clustering);
  normalized_ranks(scaled, s.clustering);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(scaled.beta[i], s.scores.beta[i], 1e-9);
  EXPECT_EQ(scaled.rank, s.scores.rank);

  // Per cluster pair, member contributions toward J sum to one.
  const int kk = static_cast<int>(s.clustering.cluster_count());
  for (int I = 0; I < kk; ++I) {
    for (int J = 0; J < kk; ++J) {
      if (I == J) continue;
      double wij = 0, total = 0;
      std::vector<double> wi(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (c[i] == I && c[j] == J) wi[i] += s.matrix.pair_weight(i, j);
        }
        wij += wi[i];
      }
      if (wij == 0) continue;
      for (std::size_t i = 0; i < n; ++i) total += wi[i] / wij;
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomClustered, ::testing::Range(0, 100));

TEST(Series, AssembleSkipsAbsentYears) {
  std::vector<BridgeScores> years;
  for (int y = 2000; y < 2003; ++y) {
    auto w = four_node();
    if (y == 2001) {
      for (int j = 0; j < 4; ++j) w[3 * 4 + j] = w[j * 4 + 3] = 0;
    }
    auto m = CoocMatrix::from_weights(2, names(4), {y, y}, w, 1);
    auto c = make_clustering(m, y == 2001 ? std::vector<int>{0, 0, 1, -1} : std::vector<int>{0, 0, 1, 1}, {});
    auto s = bridge_scores(m, c);
    normalized_ranks(s, c);
    years.push_back(s);
  }
  auto series = assemble_series(years);
  EXPECT_EQ(series.at("H10").size(), 3u);
  ASSERT_EQ(series.at("H13").size(), 2u);
  EXPECT_EQ(series.at("H13")[1].year, 2002);
}

TEST(Emerging, LinearDeclineIsRising) {
  BridgeSeries s;
  s["X"] = line(1970, 2018, 30, -29.0 / 48);
  auto found = detect_emerging(s);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].direction, TrendDirection::kRising);
  EXPECT_LT(found[0].slope, -0.1);
  EXPECT_EQ(found[0].years_covered, 49u);
  // closed-form slope on the same points
  std::vector<double> x, y;
  for (const auto& p : s["X"]) x.push_back(p.year), y.push_back(p.rank);
  EXPECT_NEAR(found[0].slope, oracle::ols(x, y).first, 1e-9);
}

TEST(Emerging, ConstantRejectedBySlope) {
  BridgeSeries s;
  s["X"] = line(1970, 2018, 3, 0);
  EXPECT_TRUE(detect_emerging(s).empty());
}

TEST(Emerging, ShortSeriesRejectedByCoverage) {
  BridgeSeries s;
  s["X"] = line(1999, 2018, 20, -1);
  EXPECT_TRUE(detect_emerging(s).empty());
  EmergingCriteria loose;
  loose.min_coverage = 0.4;
  EXPECT_EQ(detect_emerging(s, loose).size(), 1u);
}

TEST(Emerging, LowRanksRejectedByMean) {
  BridgeSeries s;
  s["X"] = line(1970, 2018, 80, -1);  // mean rank 56
  EXPECT_TRUE(detect_emerging(s).empty());
}

TEST(Emerging, TinySeriesIsSkipped) {
  BridgeSeries s;
  s["X"] = line(2000, 2001, 5, -1);
  EmergingCriteria c;
  c.min_coverage = 0;
  EXPECT_TRUE(detect_emerging(s, c).empty());
}

TEST(Emerging, LooseningNeverRemoves) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0, 3);
  BridgeSeries s;
  for (int k = 0; k < 60; ++k) {
    // the first ten are clear risers so the strict set is never empty
    auto pts = k < 10 ? line(1970 + static_cast<int>(rng() % 10), 2018, 30 + rng() % 10, -0.5)
                      : line(1970 + static_cast<int>(rng() % 30), 2018, 5 + rng() % 40, -(rng() % 100) / 100.0);
    for (auto& p : pts) p.rank = std::max(1, p.rank + static_cast<int>(noise(rng)));
    s["N" + std::to_string(k)] = pts;
  }
  auto names_of = [](const std::vector<EmergingBridge>& v) {
    std::set<std::string> out;
    for (const auto& b : v) out.insert(b.node);
    return out;
  };
  EmergingCriteria base;
  auto strict = names_of(detect_emerging(s, base));
  ASSERT_FALSE(strict.empty());
  std::vector<EmergingCriteria> looser(4, base);
  looser[0].max_mean_rank = 40;
  looser[1].min_coverage = 0.2;
  looser[2].max_p_value = 0.05;
  looser[3].min_abs_slope = 0.01;
  for (const auto& c : looser) {
    auto got = names_of(detect_emerging(s, c));
    for (const auto& n : strict) EXPECT_TRUE(got.count(n)) << n;
  }
}

TEST(Ego, StarAndClamp) {
  const std::size_t n = 11;
  std::vector<double> w(n * n, 0.0);
  for (std::size_t j = 1; j < n; ++j) w[j] = w[j * n] = 0.5 * static_cast<double>(j);
  auto m = CoocMatrix::from_weights(2, names(n), {}, w, 1);
  auto c = make_clustering(m, std::vector<int>(n, 0), {});
  auto ego = ego_subnetwork(m, c, "H10");
  ASSERT_EQ(ego.neighbors.size(), 10u);
  EXPECT_EQ(ego.neighbors.front().node, 10u);
  EXPECT_EQ(ego.neighbors.back().node, 1u);
  for (double x : ego.neighbor_weights) EXPECT_EQ(x, 0.0);

  auto leaf = ego_subnetwork(m, c, "H13", 10);
  EXPECT_EQ(leaf.neighbors.size(), 1u);
  EXPECT_THROW(ego_subnetwork(m, c, "nope"), LookupError);
}

TEST(Ego, TiesByLabel) {
  std::vector<double> w(16, 0.0);
  for (int j = 1; j < 4; ++j) w[j] = w[j * 4] = 0.5;
  w[2 * 4 + 3] = w[3 * 4 + 2] = 0.2;
  auto m = CoocMatrix::from_weights(2, names(4), {}, w, 1);
  auto c = make_clustering(m, std::vector<int>(4, 0), {});
  auto ego = ego_subnetwork(m, c, "H10", 2);
  ASSERT_EQ(ego.neighbors.size(), 2u);
  EXPECT_EQ(ego.neighbors[0].node, 1u);
  EXPECT_EQ(ego.neighbors[1].node, 2u);
}

TEST(Exports, EmptySeriesHasHeader) {
  std::ostringstream out;
  write_bridge_series_csv(out, {});
  const auto text = out.str();
  EXPECT_EQ(text.rfind("# schema: meshforge.", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}
