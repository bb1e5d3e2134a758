#include "ramp/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ramp/error.hpp"
#include "ramp/text.hpp"

namespace ramp {

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("config line " + std::to_string(row) + " lacks '='", row);
    const std::string key(text::trim(body.substr(0, eq)));
    if (key.empty()) throw ParseError("config line " + std::to_string(row) + " has an empty key", row);
    c.values_[key] = std::string(text::trim(body.substr(eq + 1)));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> Config::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double Config::num(const std::string& key, double fallback) const {
  auto v = find(key);
  if (!v || v->empty()) return fallback;
  auto d = text::to_double(*v);
  if (!d) throw ValidationError("option " + key + " expects a number, got '" + *v + "'");
  return *d;
}

long Config::integer(const std::string& key, long fallback) const {
  auto v = find(key);
  if (!v || v->empty()) return fallback;
  auto d = text::to_long(*v);
  if (!d) throw ValidationError("option " + key + " expects an integer, got '" + *v + "'");
  return *d;
}

bool Config::flag(const std::string& key, bool fallback) const {
  auto v = find(key);
  if (!v || v->empty()) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ValidationError("option " + key + " expects true or false, got '" + *v + "'");
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : values_) feed(k + "=" + v + "\n");
  return h;
}

std::string Config::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace ramp
