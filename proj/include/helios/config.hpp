#pragma once

#include <map>
#include <sstream>
#include <string>

#include "helios/error.hpp"
#include "helios/scan_io.hpp"

namespace helios {

/// Flat `key=value` text configuration. Blank lines and `#` comments are ignored.
class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw InvalidParameter("config line " + std::to_string(line_no) + ": expected key=value");
      }
      kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
  }

  static KeyValues read(const std::filesystem::path& path) { return parse(io::read_file(path)); }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = io::format_double(value); }
  void set(const std::string& key, std::size_t value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

  [[nodiscard]] std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  [[nodiscard]] double get(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw InvalidParameter("config key '" + key + "': '" + it->second + "' is not a number");
    }
  }

  [[nodiscard]] std::size_t get(const std::string& key, std::size_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size() || v < 0) throw std::invalid_argument("bad");
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw InvalidParameter("config key '" + key + "': '" + it->second +
                             "' is not a non-negative integer");
    }
  }

  [[nodiscard]] int get(const std::string& key, int fallback) const {
    return static_cast<int>(get(key, static_cast<std::size_t>(fallback)));
  }

  [[nodiscard]] bool get(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw InvalidParameter("config key '" + key + "': '" + it->second + "' is not a boolean");
  }

  /// Adds every entry of `other`, overriding existing keys.
  void merge(const KeyValues& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return values_; }

  [[nodiscard]] std::string format(const std::string& prefix = "") const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << prefix << k << '=' << v << '\n';
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace helios
