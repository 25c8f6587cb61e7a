#include "meshforge/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <stdexcept>

#include "json.hpp"
#include "meshforge/error.hpp"

namespace meshforge {

using nlohmann::json;

CorpusStats& CorpusStats::operator+=(const CorpusStats& other) {
  articles_read += other.articles_read;
  articles_kept += other.articles_kept;
  dropped_no_major_mesh += other.dropped_no_major_mesh;
  dropped_out_of_range += other.dropped_out_of_range;
  dropped_pub_type += other.dropped_pub_type;
  malformed_lines += other.malformed_lines;
  unresolved_mesh_refs += other.unresolved_mesh_refs;
  return *this;
}

namespace {

template <typename T>
T required(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw std::invalid_argument(std::string("missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("key '") + key + "' has the wrong type");
  }
}

}  // namespace

ArticleRecord parse_article(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw std::invalid_argument("record is not a JSON object");

  ArticleRecord rec;
  const auto& pmid = obj.find("pmid");
  if (pmid == obj.end()) throw std::invalid_argument("missing key 'pmid'");
  if (pmid->is_string()) {
    rec.pmid = pmid->get<std::string>();
  } else if (pmid->is_number_integer()) {
    rec.pmid = std::to_string(pmid->get<std::int64_t>());
  } else {
    throw std::invalid_argument("key 'pmid' has the wrong type");
  }
  rec.year = required<int>(obj, "year");
  rec.journal = obj.contains("journal") && !obj["journal"].is_null() ? required<std::string>(obj, "journal") : "";
  rec.authors = obj.contains("authors") && !obj["authors"].is_null() ? required<int>(obj, "authors") : 0;
  if (rec.authors < 0) throw std::invalid_argument("negative author count");

  const auto mesh = obj.find("mesh");
  if (mesh == obj.end() || !mesh->is_array()) throw std::invalid_argument("missing or non-array key 'mesh'");
  rec.mesh.reserve(mesh->size());
  for (const auto& m : *mesh) {
    if (!m.is_object()) throw std::invalid_argument("mesh entry is not an object");
    MeshRef ref;
    ref.id = required<std::string>(m, "id");
    ref.major = m.contains("major") ? required<bool>(m, "major") : false;
    rec.mesh.push_back(std::move(ref));
  }
  if (auto pt = obj.find("pub_types"); pt != obj.end() && !pt->is_null()) {
    if (!pt->is_array()) throw std::invalid_argument("key 'pub_types' must be an array");
    for (const auto& t : *pt) rec.pub_types.push_back(t.get<std::string>());
  }
  return rec;
}

std::string to_jsonl(const ArticleRecord& record) {
  nlohmann::ordered_json obj;
  obj["pmid"] = record.pmid;
  obj["year"] = record.year;
  obj["journal"] = record.journal;
  obj["authors"] = record.authors;
  auto mesh = nlohmann::ordered_json::array();
  for (const auto& m : record.mesh) mesh.push_back({{"id", m.id}, {"major", m.major}});
  obj["mesh"] = std::move(mesh);
  if (!record.pub_types.empty()) obj["pub_types"] = record.pub_types;
  return obj.dump();
}

bool apply_filters(ArticleRecord& record, const IngestOptions& options, CorpusStats& stats) {
  if (!options.years.contains(record.year)) {
    ++stats.dropped_out_of_range;
    return false;
  }
  if (!options.pub_types.empty() && !record.pub_types.empty()) {
    bool allowed = std::any_of(record.pub_types.begin(), record.pub_types.end(), [&](const std::string& t) {
      return std::find(options.pub_types.begin(), options.pub_types.end(), t) != options.pub_types.end();
    });
    if (!allowed) {
      ++stats.dropped_pub_type;
      return false;
    }
  }
  if (options.filter == MeshFilter::kMajorOnly) {
    auto& mesh = record.mesh;
    mesh.erase(std::remove_if(mesh.begin(), mesh.end(), [](const MeshRef& m) { return !m.major; }), mesh.end());
    if (mesh.empty()) {
      ++stats.dropped_no_major_mesh;
      return false;
    }
  }
  return true;
}

namespace {

// Blank lines are ignored and not counted.
template <typename Where>
void handle_line(std::string_view line, const Where& where, const IngestOptions& options,
                 const RecordSink& sink, CorpusStats& stats) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.find_first_not_of(" \t") == std::string_view::npos) return;
  ++stats.articles_read;
  ArticleRecord rec;
  try {
    rec = parse_article(line);
  } catch (const std::invalid_argument& e) {
    if (options.on_error == ErrorPolicy::kFailFast) throw ParseError(where(), e.what());
    ++stats.malformed_lines;
    return;
  }
  if (!apply_filters(rec, options, stats)) return;
  ++stats.articles_kept;
  sink(std::move(rec));
}

}  // namespace

CorpusStats ingest_stream(std::istream& in, const IngestOptions& options, const RecordSink& sink,
                          std::string_view source) {
  CorpusStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    handle_line(
        line, [&] { return std::string(source) + ":" + std::to_string(line_no); }, options, sink, stats);
  }
  return stats;
}

CorpusStats ingest_file(const std::filesystem::path& path, const IngestOptions& options, const RecordSink& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return ingest_stream(in, options, sink, path.filename().string());
}

std::vector<ByteRange> plan_shards(const std::filesystem::path& path, std::uint64_t target_bytes) {
  const std::uint64_t size = std::filesystem::file_size(path);
  target_bytes = std::max<std::uint64_t>(target_bytes, 1);
  std::vector<ByteRange> ranges;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  std::uint64_t begin = 0;
  while (begin < size) {
    std::uint64_t end = std::min(size, begin + target_bytes);
    if (end < size) {
      in.seekg(static_cast<std::streamoff>(end - 1));
      char c = 0;
      while (in.get(c) && c != '\n') {
      }
      end = in ? static_cast<std::uint64_t>(in.tellg()) : size;
      in.clear();
    }
    ranges.push_back({begin, end});
    begin = end;
  }
  return ranges;
}

CorpusStats ingest_range(const std::filesystem::path& path, ByteRange range, const IngestOptions& options,
                         const RecordSink& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  in.seekg(static_cast<std::streamoff>(range.begin));
  std::string block(range.end - range.begin, '\0');
  in.read(block.data(), static_cast<std::streamsize>(block.size()));
  block.resize(static_cast<std::size_t>(in.gcount()));

  CorpusStats stats;
  const auto name = path.filename().string();
  std::size_t pos = 0;
  while (pos < block.size()) {
    auto nl = block.find('\n', pos);
    if (nl == std::string::npos) nl = block.size();
    handle_line(
        std::string_view(block).substr(pos, nl - pos),
        [&] { return name + "@byte " + std::to_string(range.begin + pos); }, options, sink, stats);
    pos = nl + 1;
  }
  return stats;
}

std::string YearWindow::label() const {
  if (first == last) return std::to_string(first);
  return std::to_string(first) + "-" + std::to_string(last);
}

WindowSet WindowSet::make(std::vector<YearWindow> windows) {
  for (const auto& w : windows) {
    if (w.first > w.last) throw ConfigError("window " + w.label() + " ends before it starts");
  }
  auto sorted = windows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].first <= sorted[i - 1].last) {
      throw ConfigError("windows " + sorted[i - 1].label() + " and " + sorted[i].label() + " overlap");
    }
  }
  WindowSet set;
  set.windows_ = std::move(sorted);
  return set;
}

WindowSet WindowSet::annual(int first, int last) {
  std::vector<YearWindow> w;
  for (int y = first; y <= last; ++y) w.push_back({y, y});
  return make(std::move(w));
}

std::optional<std::size_t> WindowSet::locate(int year) const noexcept {
  auto it = std::upper_bound(windows_.begin(), windows_.end(), year,
                             [](int y, const YearWindow& w) { return y < w.first; });
  if (it == windows_.begin()) return std::nullopt;
  --it;
  if (!it->contains(year)) return std::nullopt;
  return static_cast<std::size_t>(it - windows_.begin());
}

WindowPartition partition_by_window(std::vector<ArticleRecord> records, const WindowSet& windows) {
  WindowPartition out;
  out.windows.resize(windows.size());
  for (auto& r : records) {
    if (auto w = windows.locate(r.year)) {
      out.windows[*w].push_back(std::move(r));
    } else {
      ++out.dropped;
    }
  }
  return out;
}

}  // namespace meshforge
