#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "nj/error.hpp"

namespace nj::harness {

// Flat key=value configuration. '#' starts a comment; blank lines are
// ignored; keys not in the allowed set are rejected.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, const std::set<std::string>& allowed, const std::string& origin = "config") {
    Config cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto key_value = trim(line);
      if (key_value.empty()) continue;
      const auto eq = key_value.find('=');
      const std::string where = origin + ":" + std::to_string(lineno);
      if (eq == std::string::npos) throw InvalidArgument(where + ": expected key=value");
      const std::string key = trim(key_value.substr(0, eq));
      const std::string value = trim(key_value.substr(eq + 1));
      if (key.empty()) throw InvalidArgument(where + ": empty key");
      if (!allowed.count(key)) throw InvalidArgument(where + ": unknown key '" + key + "'");
      if (cfg.values_.count(key)) throw InvalidArgument(where + ": duplicate key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::string& path, const std::set<std::string>& allowed) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), allowed, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != it->second.size() || it->second.empty()) throw InvalidArgument("config key '" + key + "': not a number");
    return v;
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      throw InvalidArgument("config key '" + key + "': not a non-negative integer");
    return v;
  }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
  }

  std::map<std::string, std::string> values_;
};

}  // namespace nj::harness
