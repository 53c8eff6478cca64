#pragma once

#include <stdexcept>
#include <string>

namespace huberfl {

/// Config-file problems: missing file, syntax, unknown keys, invalid values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message)
      : std::runtime_error("config error " + message) {}
};

/// Vector/metrics CSV problems, message carries the 1-based row number.
class CsvError : public std::runtime_error {
 public:
  explicit CsvError(const std::string& message)
      : std::runtime_error("csv error " + message) {}
};

/// IDX dataset file problems: bad magic, truncation, count mismatches.
class IdxError : public std::runtime_error {
 public:
  explicit IdxError(const std::string& message)
      : std::runtime_error("idx error " + message) {}
};

}  // namespace huberfl
