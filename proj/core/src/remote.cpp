#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <spdlog/spdlog.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"
#include "meshforge/corpus.hpp"
#include "meshforge/digest.hpp"
#include "meshforge/error.hpp"

namespace meshforge {

namespace fs = std::filesystem;

RateLimiter::RateLimiter(double per_second) {
  if (!(per_second > 0)) throw ConfigError("rate limit must be positive");
  interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / per_second));
}

void RateLimiter::acquire() {
  auto now = std::chrono::steady_clock::now();
  if (last_) {
    auto ready = *last_ + interval_;
    if (now < ready) {
      std::this_thread::sleep_until(ready);
      now = ready;
    }
  }
  last_ = now;
}

namespace {

namespace pt = boost::property_tree;

int leading_year(std::string_view text) {
  for (std::size_t i = 0; i + 4 <= text.size(); ++i) {
    if (std::all_of(text.begin() + i, text.begin() + i + 4, [](unsigned char c) { return std::isdigit(c); })) {
      return std::stoi(std::string(text.substr(i, 4)));
    }
  }
  return 0;
}

std::optional<ArticleRecord> article_from_ptree(const pt::ptree& article) {
  const auto citation = article.get_child_optional("MedlineCitation");
  if (!citation) return std::nullopt;
  ArticleRecord rec;
  rec.pmid = citation->get<std::string>("PMID", "");
  if (rec.pmid.empty()) return std::nullopt;

  const auto& art = citation->get_child("Article", pt::ptree());
  if (auto year = art.get_optional<std::string>("Journal.JournalIssue.PubDate.Year")) {
    rec.year = leading_year(*year);
  } else if (auto md = art.get_optional<std::string>("Journal.JournalIssue.PubDate.MedlineDate")) {
    rec.year = leading_year(*md);
  }
  if (rec.year == 0) return std::nullopt;

  rec.journal = art.get<std::string>("Journal.ISOAbbreviation", "");
  if (rec.journal.empty()) rec.journal = citation->get<std::string>("MedlineJournalInfo.MedlineTA", "");

  if (auto authors = art.get_child_optional("AuthorList")) {
    rec.authors = static_cast<int>(std::count_if(authors->begin(), authors->end(),
                                                 [](const auto& kv) { return kv.first == "Author"; }));
  }
  if (auto types = art.get_child_optional("PublicationTypeList")) {
    for (const auto& [tag, node] : *types) {
      if (tag == "PublicationType") rec.pub_types.push_back(node.data());
    }
  }
  if (auto headings = citation->get_child_optional("MeshHeadingList")) {
    for (const auto& [tag, heading] : *headings) {
      if (tag != "MeshHeading") continue;
      MeshRef ref;
      for (const auto& [field, node] : heading) {
        const bool major = node.get<std::string>("<xmlattr>.MajorTopicYN", "N") == "Y";
        if (field == "DescriptorName") {
          ref.id = node.get<std::string>("<xmlattr>.UI", "");
          ref.major = ref.major || major;
        } else if (field == "QualifierName") {
          // A starred qualifier marks the heading as a major topic.
          ref.major = ref.major || major;
        }
      }
      if (!ref.id.empty()) rec.mesh.push_back(std::move(ref));
    }
  }
  return rec;
}

struct Endpoint {
  std::string scheme_host_port;
  std::string base_path;
};

Endpoint split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, slash);
  e.base_path = slash == std::string::npos ? "" : url.substr(slash);
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  fs::rename(tmp, path);
}

std::string join(std::span<const std::string> items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(sep);
    out += items[i];
  }
  return out;
}

}  // namespace

std::vector<ArticleRecord> parse_pubmed_xml(std::string_view xml, std::uint64_t* parse_failures) {
  pt::ptree root;
  try {
    std::istringstream is{std::string(xml)};
    pt::read_xml(is, root);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("efetch response", std::string("malformed XML: ") + e.message());
  }
  std::vector<ArticleRecord> out;
  const auto set = root.get_child_optional("PubmedArticleSet");
  if (!set) return out;
  for (const auto& [tag, node] : *set) {
    if (tag != "PubmedArticle") continue;
    if (auto rec = article_from_ptree(node)) {
      out.push_back(std::move(*rec));
    } else if (parse_failures) {
      ++*parse_failures;
    }
  }
  return out;
}

PubMedClient::PubMedClient(RemoteConfig config) : config_(std::move(config)), limiter_(config_.rate_per_second) {
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string PubMedClient::get(const std::string& path_and_query, FetchStats& stats) {
  const auto endpoint = split_url(config_.base_url);
  const auto raw_path = config_.cache_dir / (sha256_hex(path_and_query) + ".raw");
  if (auto cached = read_file(raw_path)) {
    ++stats.cache_hits;
    return *cached;
  }

  httplib::Client client(endpoint.scheme_host_port);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  auto target = endpoint.base_path + path_and_query;
  if (!api_key_.empty()) target += "&api_key=" + api_key_;

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      ++stats.retries;
      std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    }
    limiter_.acquire();
    ++stats.requests;
    auto res = client.Get(target);
    if (!res) {
      last_error = httplib::to_string(res.error());
      spdlog::warn("request {} failed: {}", path_and_query, last_error);
      continue;
    }
    if (res->status == 200) {
      write_file_atomic(raw_path, res->body);
      return res->body;
    }
    last_error = "HTTP " + std::to_string(res->status);
    spdlog::warn("request {} returned {}", path_and_query, last_error);
    if (res->status != 429 && res->status < 500) break;
  }
  throw Error("remote request " + path_and_query + " failed: " + last_error);
}

std::vector<ArticleRecord> PubMedClient::fetch_batch(std::span<const std::string> pmids, FetchStats& stats) {
  const std::string query = "/efetch.fcgi?db=pubmed&retmode=xml&id=" + join(pmids, ',');
  const auto parsed_path = config_.cache_dir / (sha256_hex(query) + ".jsonl");
  std::vector<ArticleRecord> records;
  if (auto cached = read_file(parsed_path)) {
    ++stats.cache_hits;
    std::istringstream in(*cached);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) records.push_back(parse_article(line));
    }
    return records;
  }
  records = parse_pubmed_xml(get(query, stats), &stats.parse_failures);
  std::string jsonl;
  for (const auto& r : records) jsonl += to_jsonl(r) + "\n";
  write_file_atomic(parsed_path, jsonl);
  return records;
}

FetchStats PubMedClient::fetch_ids(std::span<const std::string> pmids, const RecordSink& sink) {
  FetchStats stats;
  const std::size_t batch = std::max<std::size_t>(config_.batch_size, 1);
  for (std::size_t i = 0; i < pmids.size(); i += batch) {
    auto records = fetch_batch(pmids.subspan(i, std::min(batch, pmids.size() - i)), stats);
    for (auto& r : records) {
      ++stats.records;
      sink(std::move(r));
    }
  }
  return stats;
}

FetchStats PubMedClient::fetch_range(int first_year, int last_year, const RecordSink& sink) {
  FetchStats stats;
  std::vector<std::string> ids;
  const std::size_t page = 500;
  for (std::size_t start = 0; start < config_.max_search_results; start += page) {
    const std::string query = "/esearch.fcgi?db=pubmed&retmode=json&datetype=pdat&mindate=" +
                              std::to_string(first_year) + "&maxdate=" + std::to_string(last_year) +
                              "&term=" + std::to_string(first_year) + "%3A" + std::to_string(last_year) +
                              "%5Bpdat%5D&retstart=" + std::to_string(start) + "&retmax=" + std::to_string(page);
    auto body = nlohmann::json::parse(get(query, stats), nullptr, false);
    if (body.is_discarded()) throw ParseError("esearch response", "invalid JSON");
    const auto& result = body["esearchresult"];
    std::size_t got = 0;
    for (const auto& id : result.value("idlist", nlohmann::json::array())) {
      ids.push_back(id.get<std::string>());
      ++got;
    }
    const auto count = std::stoull(result.value("count", std::string("0")));
    if (got < page || ids.size() >= count) break;
  }
  auto fetched = fetch_ids(ids, sink);
  fetched.requests += stats.requests;
  fetched.cache_hits += stats.cache_hits;
  fetched.retries += stats.retries;
  return fetched;
}

}  // namespace meshforge
