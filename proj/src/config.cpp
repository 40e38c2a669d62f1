#include "ctharness/config.hpp"

#include <cstdlib>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::config {

namespace {

std::string unquote(std::string_view v, const std::string& where) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char n = v[++i];
        out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
      } else {
        out.push_back(v[i]);
      }
    }
    return out;
  }
  if (!v.empty() && v.front() == '"') throw ConfigError(where + "unterminated string");
  // Trailing comments are only recognised on bare values.
  if (auto hash = v.find(" #"); hash != std::string_view::npos) v = trim(v.substr(0, hash));
  return std::string(v);
}

}  // namespace

Settings Settings::parse(std::string_view text, std::string_view origin) {
  Settings s;
  std::string section;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto where = std::string(origin) + ":" + std::to_string(n + 1) + ": ";
    const auto line = trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected `key = value`");
    const auto key = std::string(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "empty key");
    s.values_[section.empty() ? key : section + "." + key] = unquote(trim(line.substr(eq + 1)), where);
  }
  return s;
}

Settings Settings::load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

std::optional<std::string> Settings::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Settings::get_or(const std::string& key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

std::optional<long long> Settings::get_int(const std::string& key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  char* end = nullptr;
  const long long x = std::strtoll(v->c_str(), &end, 10);
  if (v->empty() || *end != '\0') throw ConfigError("`" + key + "` is not an integer: " + *v);
  return x;
}

std::optional<double> Settings::get_double(const std::string& key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  char* end = nullptr;
  const double x = std::strtod(v->c_str(), &end);
  if (v->empty() || *end != '\0') throw ConfigError("`" + key + "` is not a number: " + *v);
  return x;
}

std::optional<bool> Settings::get_bool(const std::string& key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  if (*v == "true") return true;
  if (*v == "false") return false;
  throw ConfigError("`" + key + "` must be true or false: " + *v);
}

}  // namespace ctharness::config
