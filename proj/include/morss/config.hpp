#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "morss/common.hpp"

namespace morss {

// ---------------------------------------------------------------------------
// Flat key-value run configuration:
//
//   # comment
//   [run]
//   kind = simulate-linear
//   seed = 42
//
// Keys live under the most recent [section]. Values are free text; typed
// accessors below validate on demand and report the exact file position when
// something does not parse.
// ---------------------------------------------------------------------------

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  long line = 0;
};

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& name) {
    KeyValueConfig cfg;
    cfg.name_ = name;
    std::string raw;
    std::string section;
    long line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string text = trim(raw);
      if (text.empty() || text.front() == '#') continue;
      if (text.front() == '[') {
        if (text.back() != ']' || text.size() < 3)
          throw ConfigError(pos(name, line) + "malformed section header '" +
                            text + "'");
        section = trim(text.substr(1, text.size() - 2));
        if (section.empty())
          throw ConfigError(pos(name, line) + "empty section name");
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string::npos)
        throw ConfigError(pos(name, line) + "expected 'key = value', got '" +
                          text + "'");
      ConfigEntry entry;
      entry.section = section;
      entry.key = trim(text.substr(0, eq));
      entry.value = trim(text.substr(eq + 1));
      entry.line = line;
      if (entry.key.empty())
        throw ConfigError(pos(name, line) + "missing key before '='");
      for (const ConfigEntry& prev : cfg.entries_)
        if (prev.section == entry.section && prev.key == entry.key)
          throw ConfigError(pos(name, line) + "duplicate key '" + entry.key +
                            "' in [" + entry.section + "] (first on line " +
                            std::to_string(prev.line) + ")");
      cfg.entries_.push_back(std::move(entry));
    }
    return cfg;
  }

  static KeyValueConfig parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    return parse(in, path.filename().string());
  }

  const std::string& name() const { return name_; }
  const std::vector<ConfigEntry>& entries() const { return entries_; }

  const ConfigEntry* find(const std::string& section,
                          const std::string& key) const {
    for (const ConfigEntry& e : entries_)
      if (e.section == section && e.key == key) return &e;
    return nullptr;
  }

  bool has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const ConfigEntry* e = find(section, key);
    return e ? e->value : fallback;
  }

  std::string require_string(const std::string& section,
                             const std::string& key) const {
    const ConfigEntry* e = find(section, key);
    if (!e || e->value.empty())
      throw ConfigError(name_ + ": missing required key '" + key + "' in [" +
                        section + "]");
    return e->value;
  }

  long get_int(const std::string& section, const std::string& key,
               long fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    return parse_int(*e);
  }

  std::uint64_t get_uint64(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    std::uint64_t value = 0;
    if (!from_chars_all(e->value, value))
      throw ConfigError(entry_pos(*e) + "expected a nonnegative integer, got '" +
                        e->value + "'");
    return value;
  }

  double get_real(const std::string& section, const std::string& key,
                  double fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    return parse_real(*e);
  }

  std::vector<double> get_real_list(const std::string& section,
                                    const std::string& key,
                                    std::vector<double> fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    std::vector<double> out;
    for (const std::string& item : split(e->value, ',')) {
      double v = 0.0;
      if (!from_chars_all(trim(item), v) || !std::isfinite(v))
        throw ConfigError(entry_pos(*e) + "expected a comma-separated list of "
                          "reals, got '" + e->value + "'");
      out.push_back(v);
    }
    if (out.empty())
      throw ConfigError(entry_pos(*e) + "expected a nonempty list");
    return out;
  }

  std::vector<std::string> get_string_list(
      const std::string& section, const std::string& key,
      std::vector<std::string> fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    std::vector<std::string> out;
    for (const std::string& item : split(e->value, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(t);
    }
    if (out.empty())
      throw ConfigError(entry_pos(*e) + "expected a nonempty list");
    return out;
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no")
      return false;
    throw ConfigError(entry_pos(*e) + "expected true/false, got '" + e->value +
                      "'");
  }

  // Rows separated by ';', entries by ','.
  Eigen::MatrixXd get_matrix(const std::string& section, const std::string& key,
                             const Eigen::MatrixXd& fallback) const {
    const ConfigEntry* e = find(section, key);
    if (!e) return fallback;
    std::vector<std::vector<double>> rows;
    for (const std::string& row_text : split(e->value, ';')) {
      std::vector<double> row;
      for (const std::string& item : split(row_text, ',')) {
        double v = 0.0;
        if (!from_chars_all(trim(item), v) || !std::isfinite(v))
          throw ConfigError(entry_pos(*e) + "expected matrix entries, got '" +
                            trim(item) + "'");
        row.push_back(v);
      }
      if (!rows.empty() && row.size() != rows.front().size())
        throw ConfigError(entry_pos(*e) + "matrix rows differ in length");
      rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty())
      throw ConfigError(entry_pos(*e) + "expected a nonempty matrix");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            rows[i][j];
    return m;
  }

  // Rejects keys outside the declared schema so typos fail loudly.
  void ensure_known(
      const std::vector<std::pair<std::string, std::set<std::string>>>& schema)
      const {
    for (const ConfigEntry& e : entries_) {
      bool section_known = false;
      bool key_known = false;
      for (const auto& [section, keys] : schema) {
        if (section != e.section) continue;
        section_known = true;
        key_known = keys.count(e.key) > 0;
      }
      if (!section_known)
        throw ConfigError(entry_pos(e) + "unknown section [" + e.section + "]");
      if (!key_known)
        throw ConfigError(entry_pos(e) + "unknown key '" + e.key + "' in [" +
                          e.section + "]");
    }
  }

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream stream(s);
    while (std::getline(stream, item, sep)) out.push_back(item);
    return out;
  }

 private:
  static std::string pos(const std::string& name, long line) {
    return name + ":" + std::to_string(line) + ": ";
  }
  std::string entry_pos(const ConfigEntry& e) const {
    return pos(name_, e.line) + "[" + e.section + "] " + e.key + ": ";
  }

  template <class T>
  static bool from_chars_all(const std::string& text, T& value) {
    if (text.empty()) return false;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, value);
    return res.ec == std::errc() && res.ptr == last;
  }

  long parse_int(const ConfigEntry& e) const {
    long value = 0;
    if (!from_chars_all(e.value, value))
      throw ConfigError(entry_pos(e) + "expected an integer, got '" + e.value +
                        "'");
    return value;
  }

  double parse_real(const ConfigEntry& e) const {
    double value = 0.0;
    if (!from_chars_all(e.value, value) || !std::isfinite(value))
      throw ConfigError(entry_pos(e) + "expected a real number, got '" +
                        e.value + "'");
    return value;
  }

  std::string name_ = "config";
  std::vector<ConfigEntry> entries_;
};

}  // namespace morss
