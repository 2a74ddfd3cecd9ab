#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fiadd {

// Flat key-value configuration. Files are INI-style: `[section]` headers and
// `key = value` lines, `#` or `;` comments. Keys are addressed as
// "section.key"; keys before any section header are addressed bare.
// Lists are comma separated.
class Config {
 public:
  Config() = default;

  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;

  // Typed getters throw InvalidInput naming the key when a present value does
  // not parse; absent keys yield the fallback.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // Every key under `section.`, with the prefix stripped.
  std::map<std::string, std::string> section(const std::string& name) const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text);
double parse_double(const std::string& text, const std::string& what);
std::int64_t parse_int(const std::string& text, const std::string& what);

}  // namespace fiadd
