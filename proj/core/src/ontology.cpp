#include "meshforge/ontology.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "meshforge/error.hpp"

namespace meshforge {

namespace {

int branch_bit(char branch) {
  if (branch < 'A' || branch > 'Z') return -1;
  return branch - 'A';
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

BranchSet BranchSet::parse(std::string_view letters) {
  BranchSet set;
  for (char c : letters) {
    if (c == ',' || c == ' ') continue;
    if (kAllBranches.find(c) == std::string_view::npos) {
      throw ConfigError(std::string("unknown branch letter '") + c + "'");
    }
    set.insert(c);
  }
  return set;
}

bool BranchSet::contains(char branch) const noexcept {
  int bit = branch_bit(branch);
  return bit >= 0 && (bits_ >> bit & 1u) != 0;
}

void BranchSet::insert(char branch) {
  int bit = branch_bit(branch);
  if (bit < 0) throw ConfigError(std::string("invalid branch letter '") + branch + "'");
  bits_ |= 1u << bit;
}

std::string BranchSet::letters() const {
  std::string out;
  for (int i = 0; i < 26; ++i) {
    if (bits_ >> i & 1u) out.push_back(static_cast<char>('A' + i));
  }
  return out;
}

std::size_t BranchSet::size() const noexcept { return static_cast<std::size_t>(__builtin_popcount(bits_)); }

TreeNumber TreeNumber::parse(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty tree number");
  if (kAllBranches.find(text.front()) == std::string_view::npos) {
    throw std::invalid_argument("tree number '" + std::string(text) + "' does not start with a branch letter");
  }
  TreeNumber tn;
  tn.path_ = std::string(text);
  if (text.size() == 1) {
    tn.depth_ = 0;
    return tn;
  }
  auto segments = split(text, '.');
  const auto head = segments.front();
  if (head.size() != 3 || !all_digits(head.substr(1))) {
    throw std::invalid_argument("tree number '" + std::string(text) + "' has malformed first segment '" +
                                std::string(head) + "'");
  }
  for (std::size_t i = 1; i < segments.size(); ++i) {
    if (!all_digits(segments[i])) {
      throw std::invalid_argument("tree number '" + std::string(text) + "' has non-numeric segment '" +
                                  std::string(segments[i]) + "'");
    }
  }
  tn.depth_ = segments.size();
  return tn;
}

std::string_view TreeNumber::l2_code() const noexcept {
  if (depth_ == 0) return {};
  return std::string_view(path_).substr(0, 3);
}

std::uint64_t SAVector::total() const noexcept {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::size_t SAVector::support() const noexcept {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c != 0; }));
}

SAVector& SAVector::operator+=(const SAVector& other) {
  if (other.level != level || other.counts.size() != counts.size()) {
    throw Error("SAVector addition across different levels or dimensions");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

OntologyTree OntologyTree::build(std::vector<Descriptor> descriptors, BranchSet filter, std::string_view source) {
  OntologyTree tree;
  tree.filter_ = filter;
  tree.stats_.descriptors_read = descriptors.size();

  std::unordered_set<std::string> seen;
  seen.reserve(descriptors.size());
  for (auto& d : descriptors) {
    if (!seen.insert(d.id).second) {
      throw ParseError(std::string(source), "duplicate descriptor id '" + d.id + "'");
    }
    auto& tns = d.tree_numbers;
    auto before = tns.size();
    tns.erase(std::remove_if(tns.begin(), tns.end(), [&](const TreeNumber& t) { return !filter.contains(t.branch()); }),
              tns.end());
    tree.stats_.locators_pruned += before - tns.size();
    if (tns.empty()) {
      ++tree.stats_.descriptors_dropped;
      tree.excluded_.insert(std::move(d.id));
      continue;
    }
    tree.descriptors_.push_back(std::move(d));
  }
  tree.stats_.descriptors_kept = tree.descriptors_.size();

  for (char c : filter.letters()) tree.l1_labels_.emplace_back(1, c);

  std::map<std::string, std::string> l2;
  for (const auto& d : tree.descriptors_) {
    for (const auto& t : d.tree_numbers) {
      if (t.depth() == 0) {
        ++tree.stats_.top_node_locators;
        continue;
      }
      auto& name = l2[std::string(t.l2_code())];
      if (t.depth() == 1 && name.empty()) name = d.name;
    }
  }
  for (auto& [code, name] : l2) {
    tree.l2_lookup_.emplace(code, tree.l2_index_.size());
    tree.l2_index_.push_back(code);
    tree.l2_names_.push_back(name);
  }

  tree.by_id_.reserve(tree.descriptors_.size());
  tree.slot_offsets_l1_.push_back(0);
  tree.slot_offsets_l2_.push_back(0);
  for (std::size_t i = 0; i < tree.descriptors_.size(); ++i) {
    const auto& d = tree.descriptors_[i];
    tree.by_id_.emplace(d.id, i);
    for (const auto& t : d.tree_numbers) {
      tree.slots_l1_.push_back(static_cast<std::uint16_t>(*tree.l1_slot(t.branch())));
      if (t.depth() > 0) tree.slots_l2_.push_back(static_cast<std::uint16_t>(*tree.l2_slot(t.l2_code())));
    }
    tree.slot_offsets_l1_.push_back(static_cast<std::uint32_t>(tree.slots_l1_.size()));
    tree.slot_offsets_l2_.push_back(static_cast<std::uint32_t>(tree.slots_l2_.size()));
  }
  return tree;
}

std::optional<std::size_t> OntologyTree::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const Descriptor* OntologyTree::find(std::string_view id) const {
  auto idx = index_of(id);
  return idx ? &descriptors_[*idx] : nullptr;
}

const Descriptor& OntologyTree::at(std::string_view id) const {
  if (const auto* d = find(id)) return *d;
  throw LookupError("unknown descriptor id '" + std::string(id) + "'");
}

bool OntologyTree::was_excluded(std::string_view id) const { return excluded_.count(std::string(id)) != 0; }

std::string_view OntologyTree::l2_name(std::size_t slot) const { return l2_names_.at(slot); }

const std::vector<std::string>& OntologyTree::labels(int level) const {
  if (level == 1) return l1_labels_;
  if (level == 2) return l2_index_;
  throw Error("level must be 1 or 2");
}

std::optional<std::size_t> OntologyTree::l1_slot(char branch) const {
  if (!filter_.contains(branch)) return std::nullopt;
  auto letters = filter_.letters();
  return letters.find(branch);
}

std::optional<std::size_t> OntologyTree::l2_slot(std::string_view code) const {
  auto it = l2_lookup_.find(std::string(code));
  if (it == l2_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::uint16_t> OntologyTree::l1_slots(std::size_t descriptor) const {
  return std::span<const std::uint16_t>(slots_l1_).subspan(
      slot_offsets_l1_[descriptor], slot_offsets_l1_[descriptor + 1] - slot_offsets_l1_[descriptor]);
}

std::span<const std::uint16_t> OntologyTree::l2_slots(std::size_t descriptor) const {
  return std::span<const std::uint16_t>(slots_l2_).subspan(
      slot_offsets_l2_[descriptor], slot_offsets_l2_[descriptor + 1] - slot_offsets_l2_[descriptor]);
}

OntologyTree parse_ontology_tsv(std::istream& in, BranchSet filter, std::string_view source) {
  std::vector<Descriptor> descriptors;
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return std::string(source) + ":" + std::to_string(line_no); };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (trim(view).empty() || trim(view).front() == '#') continue;
    auto fields = split(view, '\t');
    if (fields.size() != 3) {
      throw ParseError(where(), "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    Descriptor d;
    d.id = std::string(trim(fields[0]));
    d.name = std::string(trim(fields[1]));
    if (d.id.empty()) throw ParseError(where(), "empty descriptor id");
    auto locators = trim(fields[2]);
    if (!locators.empty()) {
      for (auto tok : split(locators, ';')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
          d.tree_numbers.push_back(TreeNumber::parse(tok));
        } catch (const std::invalid_argument& e) {
          throw ParseError(where(), e.what());
        }
      }
    }
    descriptors.push_back(std::move(d));
  }
  return OntologyTree::build(std::move(descriptors), filter, source);
}

namespace {

Descriptor descriptor_from_xml(const std::string& record, const std::string& where) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(record);
    pt::read_xml(is, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(where, std::string("malformed XML: ") + e.message());
  }
  const auto& rec = tree.get_child("DescriptorRecord");
  Descriptor d;
  d.id = std::string(trim(rec.get<std::string>("DescriptorUI", "")));
  d.name = std::string(trim(rec.get<std::string>("DescriptorName.String", "")));
  if (d.id.empty()) throw ParseError(where, "DescriptorRecord without DescriptorUI");
  if (auto list = rec.get_child_optional("TreeNumberList")) {
    for (const auto& [tag, node] : *list) {
      if (tag != "TreeNumber") continue;
      try {
        d.tree_numbers.push_back(TreeNumber::parse(trim(node.data())));
      } catch (const std::invalid_argument& e) {
        throw ParseError(where, e.what());
      }
    }
  }
  return d;
}

// Finds the next "<DescriptorRecord" start tag, skipping "<DescriptorRecordSet".
std::size_t find_record_start(const std::string& buf, std::size_t from) {
  static constexpr std::string_view kOpen = "<DescriptorRecord";
  while (true) {
    auto pos = buf.find(kOpen, from);
    if (pos == std::string::npos || pos + kOpen.size() >= buf.size()) return std::string::npos;
    char next = buf[pos + kOpen.size()];
    if (next == '>' || std::isspace(static_cast<unsigned char>(next))) return pos;
    from = pos + kOpen.size();
  }
}

}  // namespace

OntologyTree parse_ontology_xml(std::istream& in, BranchSet filter, std::string_view source) {
  static constexpr std::string_view kClose = "</DescriptorRecord>";
  std::vector<Descriptor> descriptors;
  std::string buf;
  std::vector<char> block(1 << 16);
  std::size_t record_no = 0;
  bool eof = false;
  while (!eof) {
    in.read(block.data(), static_cast<std::streamsize>(block.size()));
    auto got = static_cast<std::size_t>(in.gcount());
    buf.append(block.data(), got);
    eof = got < block.size();
    std::size_t consumed = 0;
    while (true) {
      auto start = find_record_start(buf, consumed);
      if (start == std::string::npos) break;
      auto end = buf.find(kClose, start);
      if (end == std::string::npos) {
        consumed = start;
        break;
      }
      end += kClose.size();
      ++record_no;
      descriptors.push_back(descriptor_from_xml(buf.substr(start, end - start),
                                                std::string(source) + ": record " + std::to_string(record_no)));
      consumed = end;
    }
    // Keep a possibly incomplete tag at the tail of the buffer.
    if (consumed == 0 && find_record_start(buf, 0) == std::string::npos && buf.size() > 64) {
      consumed = buf.size() - 64;
    }
    buf.erase(0, consumed);
  }
  if (find_record_start(buf, 0) != std::string::npos) {
    throw ParseError(std::string(source) + ": record " + std::to_string(record_no + 1), "unterminated DescriptorRecord");
  }
  return OntologyTree::build(std::move(descriptors), filter, source);
}

OntologyTree load_ontology(const std::filesystem::path& path, BranchSet filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open ontology file " + path.string());
  char c = 0;
  while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {
  }
  in.clear();
  in.seekg(0);
  const auto name = path.filename().string();
  if (c == '<') return parse_ontology_xml(in, filter, name);
  return parse_ontology_tsv(in, filter, name);
}

void write_ontology_tsv(std::ostream& out, const OntologyTree& tree) {
  for (const auto& d : tree.descriptors()) {
    out << d.id << '\t' << d.name << '\t';
    for (std::size_t i = 0; i < d.tree_numbers.size(); ++i) {
      if (i) out << ';';
      out << d.tree_numbers[i].str();
    }
    out << '\n';
  }
}

SAVector project_l1(const OntologyTree& tree, std::string_view id) {
  auto idx = tree.index_of(id);
  if (!idx) throw LookupError("unknown descriptor id '" + std::string(id) + "'");
  SAVector v(1, tree.dimension(1));
  for (auto slot : tree.l1_slots(*idx)) ++v.counts[slot];
  return v;
}

SAVector project_l2(const OntologyTree& tree, std::string_view id) {
  auto idx = tree.index_of(id);
  if (!idx) throw LookupError("unknown descriptor id '" + std::string(id) + "'");
  SAVector v(2, tree.dimension(2));
  for (auto slot : tree.l2_slots(*idx)) ++v.counts[slot];
  return v;
}

SAVector article_sa(const OntologyTree& tree, std::span<const std::string> ids, int level, UnresolvedPolicy policy,
                    ProjectionTally* tally) {
  SAVector v(level, tree.dimension(level));
  for (const auto& id : ids) {
    auto idx = tree.index_of(id);
    if (!idx) {
      if (policy == UnresolvedPolicy::kError) throw LookupError("unresolvable descriptor id '" + id + "'");
      if (tally) {
        if (tree.was_excluded(id)) {
          ++tally->excluded;
        } else {
          ++tally->unresolved;
        }
      }
      continue;
    }
    for (auto slot : level == 1 ? tree.l1_slots(*idx) : tree.l2_slots(*idx)) ++v.counts[slot];
  }
  return v;
}

}  // namespace meshforge
