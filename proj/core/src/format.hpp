#pragma once

// Shared text-export helpers. Every export starts with a schema line.

#include <fmt/format.h>

#include <ostream>
#include <string>
#include <string_view>

namespace meshforge::detail {

inline constexpr std::string_view kSchemaPrefix = "meshforge.";

/// "# schema: meshforge.<name>.v<version>" header for CSV/TSV exports.
inline void write_schema_line(std::ostream& out, std::string_view name, int version = 1) {
  out << "# schema: " << kSchemaPrefix << name << ".v" << version << '\n';
}

inline std::string schema_id(std::string_view name, int version = 1) {
  return fmt::format("{}{}.v{}", kSchemaPrefix, name, version);
}

/// Shortest representation that round-trips.
inline std::string num(double v) { return fmt::format("{}", v); }

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace meshforge::detail
