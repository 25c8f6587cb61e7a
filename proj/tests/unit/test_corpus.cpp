#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "meshforge/corpus.hpp"
#include "meshforge/error.hpp"

using namespace meshforge;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = MESHFORGE_FIXTURES;

std::vector<ArticleRecord> ingest_all(const std::string& path, IngestOptions opt, CorpusStats* stats = nullptr) {
  std::vector<ArticleRecord> out;
  auto s = ingest_file(path, opt, [&](ArticleRecord&& r) { out.push_back(std::move(r)); });
  if (stats) *stats = s;
  return out;
}

}  // namespace

TEST(Corpus, SmallFixtureFilters) {
  CorpusStats s;
  auto kept = ingest_all(kFixtures + "/corpus_small.jsonl", {}, &s);
  EXPECT_EQ(s.articles_read, 7u);
  EXPECT_EQ(s.malformed_lines, 1u);
  EXPECT_EQ(s.dropped_out_of_range, 1u);
  EXPECT_EQ(s.dropped_pub_type, 1u);
  EXPECT_EQ(s.dropped_no_major_mesh, 1u);
  EXPECT_EQ(s.articles_kept, 3u);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].pmid, "1");
  ASSERT_EQ(kept[0].mesh.size(), 1u);  // minor Female removed
  EXPECT_EQ(kept[0].mesh[0].id, "D009765");
  EXPECT_EQ(kept[2].pmid, "7");  // integer pmid accepted
}

TEST(Corpus, AllMeshKeepsMinorTerms) {
  IngestOptions opt;
  opt.filter = MeshFilter::kAll;
  auto kept = ingest_all(kFixtures + "/corpus_small.jsonl", opt);
  EXPECT_EQ(kept.size(), 4u);
  EXPECT_EQ(kept[0].mesh.size(), 2u);
}

TEST(Corpus, FailFastReportsLine) {
  IngestOptions opt;
  opt.on_error = ErrorPolicy::kFailFast;
  try {
    ingest_all(kFixtures + "/corpus_small.jsonl", opt);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), "corpus_small.jsonl:5");
  }
}

TEST(Corpus, JsonlRoundTrip) {
  auto kept = ingest_all(kFixtures + "/corpus_small.jsonl", {});
  for (const auto& r : kept) EXPECT_EQ(parse_article(to_jsonl(r)), r);
  EXPECT_THROW(parse_article(R"({"pmid":"1","year":2000})"), std::invalid_argument);
  EXPECT_THROW(parse_article(R"({"pmid":1.5,"year":2000,"mesh":[]})"), std::invalid_argument);
}

TEST(Corpus, ShardsEqualSequential) {
  const auto path = fs::temp_directory_path() / "meshforge_shards.jsonl";
  {
    std::mt19937_64 rng(4);
    std::ofstream out(path);
    for (int i = 0; i < 2000; ++i) {
      ArticleRecord r;
      r.pmid = std::to_string(i);
      r.year = 1965 + static_cast<int>(rng() % 60);
      r.mesh.push_back({"D" + std::to_string(rng() % 50), rng() % 4 != 0});
      out << to_jsonl(r) << '\n';
      if (i % 333 == 0) out << "garbage\n\n";
    }
  }
  CorpusStats seq_stats;
  auto seq = ingest_all(path.string(), {}, &seq_stats);
  for (std::uint64_t target : {1ull, 100ull, 4096ull, 1ull << 30}) {
    auto ranges = plan_shards(path, target);
    ASSERT_FALSE(ranges.empty());
    EXPECT_EQ(ranges.front().begin, 0u);
    EXPECT_EQ(ranges.back().end, fs::file_size(path));
    std::vector<ArticleRecord> got;
    CorpusStats total;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (i) EXPECT_EQ(ranges[i].begin, ranges[i - 1].end);
      total += ingest_range(path, ranges[i], {}, [&](ArticleRecord&& r) { got.push_back(std::move(r)); });
    }
    EXPECT_EQ(total, seq_stats) << target;
    EXPECT_EQ(got, seq) << target;
  }
  fs::remove(path);
}

TEST(Windows, LabelsLocateAndOverlap) {
  auto w = WindowSet::make({{1970, 1989}, {1990, 1999}});
  EXPECT_EQ(w.windows()[0].label(), "1970-1989");
  EXPECT_EQ(*w.locate(1990), 1u);
  EXPECT_FALSE(w.locate(2000).has_value());
  EXPECT_THROW(WindowSet::make({{1970, 1990}, {1990, 1999}}), ConfigError);
  EXPECT_THROW(WindowSet::make({{1999, 1990}}), ConfigError);
  EXPECT_EQ(WindowSet::annual(2000, 2004).size(), 5u);
}

TEST(Windows, PartitionRoutesEachRecordOnce) {
  std::vector<ArticleRecord> rs(5);
  const int years[] = {1971, 1995, 1990, 2005, 1989};
  for (int i = 0; i < 5; ++i) rs[i].year = years[i];
  auto p = partition_by_window(rs, WindowSet::make({{1970, 1989}, {1990, 1999}}));
  EXPECT_EQ(p.windows[0].size(), 2u);
  EXPECT_EQ(p.windows[1].size(), 2u);
  EXPECT_EQ(p.dropped, 1u);
}
