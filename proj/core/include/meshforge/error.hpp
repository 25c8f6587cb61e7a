#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace meshforge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input. `location` is a human-readable position such as
/// "mesh.tsv:17" or "corpus.jsonl@byte 40960".
class ParseError : public Error {
 public:
  ParseError(std::string location, const std::string& message)
      : Error(location.empty() ? message : location + ": " + message),
        location_(std::move(location)) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace meshforge
