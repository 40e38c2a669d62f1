#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace ctharness::config {

// Flat `key = value` settings. Lines starting with '#' are comments, values
// may be double-quoted, and `[section]` headers prefix the keys that follow
// as `section.key`.
class Settings {
 public:
  static Settings parse(std::string_view text, std::string_view origin = "<config>");
  static Settings load(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, std::string fallback) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ctharness::config
