#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "meshforge/corpus.hpp"
#include "meshforge/error.hpp"

using namespace meshforge;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = MESHFORGE_FIXTURES;

std::string read(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Serves the cassette on /efetch.fcgi, failing the first `failures` requests
// with the given status.
class FakeEutils {
 public:
  FakeEutils(int failures, int status) : failures_(failures), status_(status) {
    body_ = read(kFixtures + "/efetch_cassette.xml");
    server_.Get("/eutils/efetch.fcgi", [this](const httplib::Request&, httplib::Response& res) {
      times_.push_back(std::chrono::steady_clock::now());
      if (hits_++ < failures_) {
        res.status = status_;
        return;
      }
      res.set_content(body_, "text/xml");
    });
    server_.Get("/eutils/esearch.fcgi", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      res.set_content(R"({"esearchresult":{"count":"2","idlist":["10000001","10000002"]}})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEutils() {
    server_.stop();
    thread_.join();
  }

  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/eutils"; }
  int hits() const { return hits_; }
  const std::vector<std::chrono::steady_clock::time_point>& times() const { return times_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  int status_;
  std::atomic<int> hits_{0};
  std::string body_;
  std::vector<std::chrono::steady_clock::time_point> times_;
};

RemoteConfig config_for(const FakeEutils& server, const std::string& tag) {
  RemoteConfig c;
  c.base_url = server.base();
  c.cache_dir = fs::temp_directory_path() / ("meshforge_remote_" + tag);
  fs::remove_all(c.cache_dir);
  c.backoff = std::chrono::milliseconds(5);
  c.rate_per_second = 1000;
  c.timeout = std::chrono::seconds(5);
  return c;
}

}  // namespace

TEST(PubmedXml, CassetteParses) {
  std::uint64_t failures = 0;
  auto recs = parse_pubmed_xml(read(kFixtures + "/efetch_cassette.xml"), &failures);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(failures, 1u);

  const auto& a = recs[0];
  EXPECT_EQ(a.pmid, "10000001");
  EXPECT_EQ(a.year, 1999);
  EXPECT_EQ(a.journal, "Obes Res");
  EXPECT_EQ(a.authors, 3);
  ASSERT_EQ(a.mesh.size(), 3u);
  EXPECT_EQ(a.mesh[0], (MeshRef{"D009765", true}));
  EXPECT_EQ(a.mesh[1], (MeshRef{"D005260", false}));
  EXPECT_EQ(a.mesh[2], (MeshRef{"D008000", true}));  // major via qualifier
  EXPECT_EQ(a.pub_types, (std::vector<std::string>{"Journal Article"}));

  const auto& b = recs[1];
  EXPECT_EQ(b.year, 1998);  // MedlineDate "1998 Dec-1999 Jan"
  EXPECT_EQ(b.journal, "Fixture J");
  EXPECT_EQ(b.pub_types, (std::vector<std::string>{"Review"}));
}

TEST(PubmedXml, MalformedIsParseError) { EXPECT_THROW(parse_pubmed_xml("<PubmedArticleSet><oops"), ParseError); }

TEST(RateLimiter, SpacesRequests) {
  RateLimiter limiter(50);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) limiter.acquire();
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(99));
}

TEST(Remote, FetchThenCache) {
  FakeEutils server(0, 200);
  auto cfg = config_for(server, "cache");
  std::vector<std::string> ids{"10000001", "10000002"};
  std::vector<ArticleRecord> got;
  PubMedClient client(cfg);
  auto s = client.fetch_ids(ids, [&](ArticleRecord&& r) { got.push_back(std::move(r)); });
  EXPECT_EQ(s.records, 2u);
  EXPECT_EQ(s.requests, 1u);
  EXPECT_EQ(s.parse_failures, 1u);
  EXPECT_EQ(got[0].pmid, "10000001");

  PubMedClient again(cfg);
  auto s2 = again.fetch_ids(ids, [](ArticleRecord&&) {});
  EXPECT_EQ(s2.requests, 0u);
  EXPECT_EQ(s2.cache_hits, 1u);
  EXPECT_EQ(s2.records, 2u);
  EXPECT_EQ(server.hits(), 1);
  fs::remove_all(cfg.cache_dir);
}

TEST(Remote, RetriesTransientErrors) {
  FakeEutils server(2, 503);
  auto cfg = config_for(server, "retry");
  PubMedClient client(cfg);
  std::vector<std::string> ids{"10000001"};
  auto s = client.fetch_ids(ids, [](ArticleRecord&&) {});
  EXPECT_EQ(s.retries, 2u);
  EXPECT_EQ(s.requests, 3u);
  EXPECT_EQ(s.records, 2u);
  fs::remove_all(cfg.cache_dir);
}

TEST(Remote, GivesUpAfterMaxRetriesAndOnClientErrors) {
  {
    FakeEutils server(100, 429);
    auto cfg = config_for(server, "giveup");
    cfg.max_retries = 2;
    PubMedClient client(cfg);
    std::vector<std::string> ids{"1"};
    EXPECT_THROW(client.fetch_ids(ids, [](ArticleRecord&&) {}), Error);
    EXPECT_EQ(server.hits(), 3);
    fs::remove_all(cfg.cache_dir);
  }
  {
    FakeEutils server(100, 404);
    auto cfg = config_for(server, "notfound");
    PubMedClient client(cfg);
    std::vector<std::string> ids{"1"};
    EXPECT_THROW(client.fetch_ids(ids, [](ArticleRecord&&) {}), Error);
    EXPECT_EQ(server.hits(), 1);
    fs::remove_all(cfg.cache_dir);
  }
}

TEST(Remote, RateLimitHonoured) {
  FakeEutils server(3, 500);
  auto cfg = config_for(server, "rate");
  cfg.backoff = std::chrono::milliseconds(0);
  cfg.rate_per_second = 20;
  PubMedClient client(cfg);
  std::vector<std::string> ids{"10000001"};
  client.fetch_ids(ids, [](ArticleRecord&&) {});
  const auto& t = server.times();
  ASSERT_EQ(t.size(), 4u);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_GE(t[i] - t[i - 1], std::chrono::milliseconds(45));
  fs::remove_all(cfg.cache_dir);
}

TEST(Remote, RangeSearchesThenFetches) {
  FakeEutils server(0, 200);
  auto cfg = config_for(server, "range");
  PubMedClient client(cfg);
  std::size_t n = 0;
  auto s = client.fetch_range(1998, 1999, [&](ArticleRecord&&) { ++n; });
  EXPECT_EQ(n, 2u);
  EXPECT_EQ(s.requests, 2u);
  fs::remove_all(cfg.cache_dir);
}
