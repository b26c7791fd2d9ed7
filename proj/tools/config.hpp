#pragma once

// Strict JSON config access: every key a command reads is registered, and any
// key left over afterwards is an error.

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace lft::cli {

using nlohmann::json;

/// Bad or unknown configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Section {
 public:
  Section(const json& j, std::string path);

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string str(const std::string& key, const std::string& fallback);
  double num(const std::string& key, double fallback);
  std::uint64_t uint(const std::string& key, std::uint64_t fallback);
  bool flag(const std::string& key, bool fallback);
  std::vector<std::size_t> uint_list(const std::string& key, const std::vector<std::size_t>& fallback);
  std::vector<std::string> str_list(const std::string& key, const std::vector<std::string>& fallback);
  /// Nested object (empty when absent). Finish it, then adopt() it back.
  Section sub(const std::string& key);
  /// Array of objects (empty when absent).
  std::vector<Section> objects(const std::string& key);
  /// Records a finished child's resolved values under `key`.
  void adopt(const std::string& key, const Section& child);
  void adopt(const std::string& key, const std::vector<Section>& children);

  /// Throws ConfigError naming every key that was never read.
  void finish() const;

  /// Everything read so far, with defaults filled in.
  const json& resolved() const { return resolved_; }

 private:
  const json& at(const std::string& key);

  json j_;
  std::string path_;
  std::set<std::string> used_;
  json resolved_ = json::object();
};

}  // namespace lft::cli
