#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace weakrank {

inline constexpr const char* kToolVersion = "weakrank 0.1.0";

inline std::uint64_t fnv1a_hash(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Flat `key = value` config with '#' comments. No sections, no nesting;
// every effective setting is greppable.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    Config cfg = from_string(buffer.str());
    cfg.path_ = path;
    return cfg;
  }

  static Config from_string(const std::string& text) {
    Config cfg;
    cfg.hash_ = fnv1a_hash(text);
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash_pos = line.find('#');
      if (hash_pos != std::string::npos) line.erase(hash_pos);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw std::runtime_error("config line " + std::to_string(lineno) +
                                   ": expected key = value");
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::runtime_error("config: missing key `" + key + "`");
    return it->second;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::int64_t get_int(const std::string& key) const { return parse_int(key, get(key)); }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto v = get_int(key);
    if (v < 0) throw std::runtime_error("config: key `" + key + "` must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: key `" + key + "` is not a boolean: " + v);
  }

  // Comma-separated integer list, e.g. `hidden = 128,128`.
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    std::istringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ','))
      out.push_back(static_cast<int>(parse_int(key, trim(item))));
    return out;
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::uint64_t hash() const { return hash_; }
  const std::string& path() const { return path_; }
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  double parse_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key `" + key + "` is not a number: " + v);
    }
  }

  std::int64_t parse_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const long long i = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return i;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key `" + key + "` is not an integer: " + v);
    }
  }

  std::map<std::string, std::string> kv_;
  std::uint64_t hash_ = 0;
  std::string path_;
};

}  // namespace weakrank
