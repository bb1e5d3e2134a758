#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace ramp {

// Flat key-value run configuration. File syntax: one "key = value" per
// line, '#' starts a comment. Keys use the long flag names of the CLI.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> find(const std::string& key) const;

  std::string str(const std::string& key, const std::string& fallback = {}) const;
  double num(const std::string& key, double fallback) const;     // ValidationError on junk
  long integer(const std::string& key, long fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // FNV-1a 64 over "key=value\n" in key order.
  std::uint64_t hash() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ramp
