#include "ctharness/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <regex>
#include <unordered_map>
#include <unordered_set>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::corpus {

using nlohmann::json;

namespace {

int parse_digits(std::string_view s, std::size_t pos, std::size_t count) {
  if (pos + count > s.size()) throw ValidationError("timestamp too short: " + std::string(s));
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') throw ValidationError("bad timestamp: " + std::string(s));
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect_char(std::string_view s, std::size_t pos, std::string_view allowed) {
  if (pos >= s.size() || allowed.find(s[pos]) == std::string_view::npos) {
    throw ValidationError("bad timestamp: " + std::string(s));
  }
}

template <typename Enum, std::size_t N>
Enum lookup(std::string_view name, const std::array<std::pair<std::string_view, Enum>, N>& table,
            const char* what) {
  for (const auto& [key, value] : table) {
    if (key == name) return value;
  }
  throw ValidationError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

template <typename Enum, std::size_t N>
std::string_view reverse_lookup(Enum value,
                                const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [key, v] : table) {
    if (v == value) return key;
  }
  return "?";
}

constexpr std::array<std::pair<std::string_view, Stance>, 7> kStances{{
    {"belief", Stance::belief},
    {"authenticating", Stance::authenticating},
    {"directive", Stance::directive},
    {"rhetorical_question", Stance::rhetorical_question},
    {"disbelief", Stance::disbelief},
    {"neutral", Stance::neutral},
    {"uncertain", Stance::uncertain},
}};

constexpr std::array<std::pair<std::string_view, Component>, 3> kComponents{{
    {"actor", Component::actor},
    {"strategy", Component::strategy},
    {"goal", Component::goal},
}};

// --- text cleaning ------------------------------------------------------------

const std::regex& url_pattern() {
  static const std::regex re(R"((?:[A-Za-z][A-Za-z0-9+.\-]*://|www\.|t\.me/)\S*)",
                             std::regex::ECMAScript | std::regex::icase);
  return re;
}

const std::regex& handle_pattern() {
  static const std::regex re(R"(@\w+)", std::regex::ECMAScript);
  return re;
}

const std::regex& iban_pattern() {
  static const std::regex re(R"(\b[A-Z]{2}[0-9]{2}(?: ?[A-Z0-9]){11,30}\b)", std::regex::ECMAScript);
  return re;
}

bool is_emoji(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
         (cp >= 0x2B00 && cp <= 0x2BFF) || (cp >= 0x2300 && cp <= 0x23FF) ||
         (cp >= 0xE0020 && cp <= 0xE007F) || cp == 0xFE0F || cp == 0xFE0E || cp == 0x200D ||
         cp == 0x20E3 || cp == 0x3030 || cp == 0x303D || cp == 0x3297 || cp == 0x3299 ||
         cp == 0x00A9 || cp == 0x00AE || cp == 0x2122;
}

// Drops emoji code points; bytes that are not valid UTF-8 pass through untouched.
std::string strip_emoji(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len <= 1 || i + len > s.size()) {
      out.push_back(s[i]);
      ++i;
      continue;
    }
    char32_t cp = len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    bool valid = true;
    for (std::size_t k = 1; k < len; ++k) {
      auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!valid) {
      out.push_back(s[i]);
      ++i;
      continue;
    }
    if (!is_emoji(cp)) out.append(s.substr(i, len));
    i += len;
  }
  return out;
}

// Collapses runs of spaces/tabs, strips trailing whitespace per line, and trims the text.
std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const auto& line : split_lines(s)) {
    std::string collapsed;
    bool in_run = false;
    for (char c : trim_right(line)) {
      if (c == ' ' || c == '\t') {
        if (!in_run) collapsed.push_back(' ');
        in_run = true;
      } else {
        collapsed.push_back(c);
        in_run = false;
      }
    }
    out += collapsed;
    out.push_back('\n');
  }
  return std::string(trim(out));
}

std::vector<std::string> normalized_lines(std::string_view text) {
  auto lines = split_lines(trim_right(text));
  for (auto& l : lines) l = std::string(trim_right(l));
  return lines;
}

std::string join_tail(const std::vector<std::string>& lines, std::size_t k) {
  std::string block;
  for (std::size_t i = lines.size() - k; i < lines.size(); ++i) {
    if (!block.empty() || i > lines.size() - k) block.push_back('\n');
    block += lines[i];
  }
  return block;
}

std::string remove_footer(std::string_view text, const std::set<std::string>& footers,
                          std::size_t max_lines) {
  auto lines = normalized_lines(text);
  for (std::size_t k = std::min(max_lines, lines.size() - 1); k >= 1 && lines.size() > 1; --k) {
    if (footers.contains(join_tail(lines, k))) {
      lines.resize(lines.size() - k);
      std::string body;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) body.push_back('\n');
        body += lines[i];
      }
      return body;
    }
  }
  return std::string(text);
}

std::string clean_once(std::string_view text, std::string_view channel_id, const PreprocessRules& rules) {
  std::string s(text);
  if (rules.remove_footers) {
    auto it = rules.footers.by_channel.find(std::string(channel_id));
    if (it != rules.footers.by_channel.end()) s = remove_footer(s, it->second, rules.footers.max_lines);
  }
  if (rules.remove_urls) s = std::regex_replace(s, url_pattern(), "");
  if (rules.remove_handles) s = std::regex_replace(s, handle_pattern(), "");
  if (rules.remove_ibans) s = std::regex_replace(s, iban_pattern(), "");
  if (rules.emoji == EmojiPolicy::strip) s = strip_emoji(s);
  return normalize_whitespace(s);
}

// --- CSV ----------------------------------------------------------------------

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> parse_csv(std::string_view s) {
  std::vector<CsvRow> rows;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < s.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool row_done = false;
    while (!row_done) {
      field.clear();
      if (i < s.size() && s[i] == '"') {
        ++i;
        while (true) {
          if (i >= s.size()) throw IngestError("line " + std::to_string(row.line) + ": unterminated quoted field");
          if (s[i] == '"') {
            if (i + 1 < s.size() && s[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (s[i] == '\n') ++line;
          field.push_back(s[i++]);
        }
        if (i < s.size() && s[i] != ',' && s[i] != '\n' && s[i] != '\r') {
          throw IngestError("line " + std::to_string(line) + ": characters after closing quote");
        }
      } else {
        while (i < s.size() && s[i] != ',' && s[i] != '\n' && s[i] != '\r') field.push_back(s[i++]);
      }
      row.fields.push_back(field);
      if (i >= s.size()) {
        row_done = true;
      } else if (s[i] == ',') {
        ++i;
      } else {
        if (s[i] == '\r') ++i;
        if (i < s.size() && s[i] == '\n') ++i;
        ++line;
        row_done = true;
      }
    }
    bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
  }
  return rows;
}

bool parse_bool_field(std::string_view v, std::size_t line, std::string_view name) {
  auto s = to_lower_ascii(trim(v));
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw IngestError("line " + std::to_string(line) + ": field `" + std::string(name) + "` is not a boolean");
}

void check_unique(std::unordered_map<std::string, std::size_t>& seen, const std::string& id, std::size_t line) {
  auto [it, inserted] = seen.emplace(id, line);
  if (!inserted) {
    throw DuplicateIdError("line " + std::to_string(line) + ": duplicate id '" + id + "' (first seen on line " +
                           std::to_string(it->second) + ")");
  }
}

}  // namespace

// --- enums ----------------------------------------------------------------------

std::string_view to_string(Stance s) { return reverse_lookup(s, kStances); }
std::string_view to_string(Component c) { return reverse_lookup(c, kComponents); }
std::string_view to_string(Label l) { return l == Label::positive ? "positive" : "negative"; }
std::string_view to_string(LabelDecision d) {
  switch (d) {
    case LabelDecision::positive: return "positive";
    case LabelDecision::negative: return "negative";
    case LabelDecision::excluded: return "excluded";
  }
  return "?";
}
std::string_view to_string(InputFormat f) { return f == InputFormat::jsonl ? "jsonl" : "csv"; }
std::string_view to_string(EmojiPolicy p) { return p == EmojiPolicy::keep ? "keep" : "strip"; }

Stance parse_stance(std::string_view s) { return lookup(s, kStances, "stance"); }
Component parse_component(std::string_view s) { return lookup(s, kComponents, "component"); }
Label parse_label(std::string_view s) {
  if (s == "positive" || s == "1") return Label::positive;
  if (s == "negative" || s == "0") return Label::negative;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}
InputFormat parse_input_format(std::string_view s) {
  if (s == "jsonl") return InputFormat::jsonl;
  if (s == "csv") return InputFormat::csv;
  throw ValidationError("unknown input format '" + std::string(s) + "'");
}
EmojiPolicy parse_emoji_policy(std::string_view s) {
  if (s == "keep") return EmojiPolicy::keep;
  if (s == "strip") return EmojiPolicy::strip;
  throw ValidationError("unknown emoji policy '" + std::string(s) + "'");
}

// --- timestamps -------------------------------------------------------------------

Timestamp parse_timestamp(std::string_view iso) {
  using namespace std::chrono;
  const int y = parse_digits(iso, 0, 4);
  expect_char(iso, 4, "-");
  const int mo = parse_digits(iso, 5, 2);
  expect_char(iso, 7, "-");
  const int d = parse_digits(iso, 8, 2);
  if (iso.size() == 10) {
    const year_month_day date{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw ValidationError("bad timestamp: " + std::string(iso));
    return sys_days{date};
  }
  expect_char(iso, 10, "Tt ");
  const int h = parse_digits(iso, 11, 2);
  expect_char(iso, 13, ":");
  const int mi = parse_digits(iso, 14, 2);
  expect_char(iso, 16, ":");
  const int sec = parse_digits(iso, 17, 2);
  std::size_t pos = 19;
  if (pos < iso.size() && iso[pos] == '.') {
    ++pos;
    while (pos < iso.size() && iso[pos] >= '0' && iso[pos] <= '9') ++pos;
  }
  int offset_minutes = 0;
  if (pos < iso.size()) {
    if (iso[pos] == 'Z' || iso[pos] == 'z') {
      ++pos;
    } else if (iso[pos] == '+' || iso[pos] == '-') {
      const int sign = iso[pos] == '-' ? -1 : 1;
      const int oh = parse_digits(iso, pos + 1, 2);
      std::size_t mpos = pos + 3;
      if (mpos < iso.size() && iso[mpos] == ':') ++mpos;
      const int om = parse_digits(iso, mpos, 2);
      offset_minutes = sign * (oh * 60 + om);
      pos = mpos + 2;
    }
  }
  if (pos != iso.size()) throw ValidationError("bad timestamp: " + std::string(iso));
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw ValidationError("bad timestamp: " + std::string(iso));
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{ts - day_point};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

// --- annotation -----------------------------------------------------------------------

void Annotation::validate() const {
  if (!ct_present) {
    if (!components.empty()) throw ValidationError("annotation without a conspiracy theory lists components");
    if (reference_only) throw ValidationError("annotation without a conspiracy theory is marked reference_only");
    if (stance) throw ValidationError("stance is only defined when a conspiracy theory is present");
  }
}

LabelDecision derive_label(const Annotation& a) {
  a.validate();
  if (!a.ct_present) return LabelDecision::negative;
  if (a.stance == Stance::belief && !a.reference_only) return LabelDecision::positive;
  return LabelDecision::excluded;
}

int fragmentation_score(const Annotation& a) {
  if (!a.ct_present) throw UndefinedScoreError("fragmentation score undefined: no conspiracy theory annotated");
  if (a.components.empty()) throw UndefinedScoreError("fragmentation score undefined: no narrative components");
  return 3 - static_cast<int>(a.components.size());
}

// --- ingestion -------------------------------------------------------------------------

json to_json(const Annotation& a) {
  json j;
  j["ct_present"] = a.ct_present;
  j["stance"] = a.stance ? json(std::string(to_string(*a.stance))) : json(nullptr);
  json comps = json::array();
  for (auto c : a.components) comps.push_back(std::string(to_string(c)));
  j["components"] = comps;
  j["reference_only"] = a.reference_only;
  return j;
}

Annotation annotation_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("annotation must be an object");
  Annotation a;
  a.ct_present = j.at("ct_present").get<bool>();
  if (auto it = j.find("stance"); it != j.end() && !it->is_null()) a.stance = parse_stance(it->get<std::string>());
  if (auto it = j.find("components"); it != j.end() && !it->is_null()) {
    for (const auto& c : *it) a.components.insert(parse_component(c.get<std::string>()));
  }
  if (auto it = j.find("reference_only"); it != j.end() && !it->is_null()) a.reference_only = it->get<bool>();
  return a;
}

std::vector<Record> ingest_jsonl(std::string_view contents) {
  std::vector<Record> records;
  std::unordered_map<std::string, std::size_t> seen;
  const auto lines = split_lines(contents);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    const auto line = trim(lines[n]);
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IngestError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw IngestError(where + "record is not a JSON object");
    Record r;
    for (const char* field : {"id", "channel_id", "timestamp", "text"}) {
      auto it = j.find(field);
      if (it == j.end() || !it->is_string()) {
        throw IngestError(where + "missing or non-string field `" + field + "`");
      }
    }
    r.message.id = j["id"].get<std::string>();
    r.message.channel_id = j["channel_id"].get<std::string>();
    try {
      r.message.timestamp = parse_timestamp(j["timestamp"].get<std::string>());
    } catch (const ValidationError& e) {
      throw IngestError(where + e.what());
    }
    r.message.raw_text = j["text"].get<std::string>();
    r.message.text = r.message.raw_text;
    if (auto it = j.find("annotation"); it != j.end() && !it->is_null()) {
      try {
        r.annotation = annotation_from_json(*it);
      } catch (const std::exception& e) {
        throw IngestError(where + "bad annotation (" + e.what() + ")");
      }
    }
    check_unique(seen, r.message.id, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<Record> ingest_csv(std::string_view contents) {
  auto rows = parse_csv(contents);
  if (rows.empty()) return {};
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) col[std::string(trim(rows[0].fields[i]))] = i;
  for (const char* field : {"id", "channel_id", "timestamp", "text"}) {
    if (!col.contains(field)) throw IngestError("line 1: header lacks column `" + std::string(field) + "`");
  }
  auto cell = [&](const CsvRow& row, const std::string& name) -> std::optional<std::string> {
    auto it = col.find(name);
    if (it == col.end() || it->second >= row.fields.size()) return std::nullopt;
    return row.fields[it->second];
  };

  std::vector<Record> records;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = "line " + std::to_string(row.line) + ": ";
    if (row.fields.size() != rows[0].fields.size()) {
      throw IngestError(where + "expected " + std::to_string(rows[0].fields.size()) + " fields, got " +
                        std::to_string(row.fields.size()));
    }
    Record rec;
    rec.message.id = *cell(row, "id");
    rec.message.channel_id = *cell(row, "channel_id");
    rec.message.raw_text = *cell(row, "text");
    rec.message.text = rec.message.raw_text;
    if (rec.message.id.empty()) throw IngestError(where + "empty field `id`");
    try {
      rec.message.timestamp = parse_timestamp(trim(*cell(row, "timestamp")));
    } catch (const ValidationError& e) {
      throw IngestError(where + e.what());
    }
    if (auto ct = cell(row, "ct_present"); ct && !trim(*ct).empty()) {
      Annotation a;
      a.ct_present = parse_bool_field(*ct, row.line, "ct_present");
      try {
        if (auto st = cell(row, "stance"); st && !trim(*st).empty()) a.stance = parse_stance(trim(*st));
        if (auto comps = cell(row, "components"); comps) {
          std::string list = *comps;
          std::replace(list.begin(), list.end(), '|', ';');
          std::size_t start = 0;
          while (start <= list.size()) {
            auto end = list.find(';', start);
            if (end == std::string::npos) end = list.size();
            auto item = trim(std::string_view(list).substr(start, end - start));
            if (!item.empty()) a.components.insert(parse_component(item));
            start = end + 1;
          }
        }
      } catch (const ValidationError& e) {
        throw IngestError(where + "bad annotation (" + e.what() + ")");
      }
      if (auto ro = cell(row, "reference_only"); ro && !trim(*ro).empty()) {
        a.reference_only = parse_bool_field(*ro, row.line, "reference_only");
      }
      rec.annotation = a;
    }
    check_unique(seen, rec.message.id, row.line);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Record> ingest(const std::filesystem::path& path, InputFormat format) {
  if (!std::filesystem::exists(path)) throw IngestError("input file does not exist: " + path.string());
  const auto contents = read_file(path);
  return format == InputFormat::jsonl ? ingest_jsonl(contents) : ingest_csv(contents);
}

// --- cleaning ---------------------------------------------------------------------------

FooterIndex detect_footers(const std::vector<Message>& messages, std::size_t min_occurrences,
                           std::size_t max_lines) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto& m : messages) {
    const auto lines = normalized_lines(m.text);
    if (lines.size() < 2) continue;
    std::set<std::string> blocks;
    for (std::size_t k = 1; k <= std::min(max_lines, lines.size() - 1); ++k) {
      auto block = join_tail(lines, k);
      if (!trim(block).empty()) blocks.insert(std::move(block));
    }
    auto& channel = counts[m.channel_id];
    for (auto& b : blocks) ++channel[b];
  }
  FooterIndex index;
  index.max_lines = max_lines;
  for (const auto& [channel, blocks] : counts) {
    for (const auto& [block, n] : blocks) {
      if (n >= min_occurrences) index.by_channel[channel].insert(block);
    }
  }
  return index;
}

std::string clean_text(std::string_view text, std::string_view channel_id, const PreprocessRules& rules) {
  // Every pass only removes bytes, so iterating to a fixpoint terminates and
  // makes the cleaning idempotent even when a removal exposes a new match.
  std::string current = clean_once(text, channel_id, rules);
  while (true) {
    std::string next = clean_once(current, channel_id, rules);
    if (next == current) return current;
    current = std::move(next);
  }
}

Message preprocess(const Message& message, const PreprocessRules& rules) {
  Message out = message;
  out.text = clean_text(message.text, message.channel_id, rules);
  return out;
}

// --- filtering and splitting ----------------------------------------------------------------

std::size_t token_count(std::string_view text) { return whitespace_tokens(text).size(); }

std::vector<LabeledExample> filter_short(const std::vector<LabeledExample>& examples, std::size_t min_tokens) {
  if (min_tokens < 1) throw ValidationError("min_tokens must be at least 1");
  std::vector<LabeledExample> out;
  std::copy_if(examples.begin(), examples.end(), std::back_inserter(out),
               [&](const LabeledExample& e) { return token_count(e.message.text) >= min_tokens; });
  return out;
}

std::vector<LabeledExample> dedupe(const std::vector<LabeledExample>& examples) {
  std::unordered_set<std::string> seen;
  std::vector<LabeledExample> out;
  for (const auto& e : examples) {
    if (seen.insert(e.message.text).second) out.push_back(e);
  }
  return out;
}

std::array<std::size_t, 3> allocate_counts(std::size_t n, const SplitRatios& ratios) {
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * r[i];
    const double whole = std::floor(exact + 1e-9);
    counts[i] = static_cast<std::size_t>(whole);
    frac[i] = std::max(0.0, exact - whole);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
    if (r[order[k]] > 0.0) {
      ++counts[order[k]];
      ++assigned;
    }
  }
  return counts;
}

DatasetSplit split(const std::vector<LabeledExample>& examples, const SplitRatios& ratios, std::uint64_t seed,
                   bool stratify) {
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  for (double x : r) {
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("split ratios must lie in [0, 1]");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
  if (examples.empty()) throw ValidationError("cannot split an empty example set");

  std::array<std::vector<std::size_t>, 3> assigned;
  auto assign = [&](std::vector<std::size_t> indices, std::uint64_t stream) {
    Rng rng(mix_seed(seed, stream));
    rng.shuffle(indices);
    const auto counts = allocate_counts(indices.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < counts[s]; ++k) assigned[s].push_back(indices[pos++]);
    }
  };

  if (stratify) {
    const auto n_splits = static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](double x) { return x > 0.0; }));
    for (Label label : {Label::negative, Label::positive}) {
      std::vector<std::size_t> indices;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].label == label) indices.push_back(i);
      }
      if (indices.empty()) continue;
      if (indices.size() < n_splits) {
        throw StratificationError("class '" + std::string(to_string(label)) + "' has " +
                                  std::to_string(indices.size()) + " item(s), fewer than the " +
                                  std::to_string(n_splits) + " splits");
      }
      assign(std::move(indices), static_cast<std::uint64_t>(label));
    }
  } else {
    std::vector<std::size_t> indices(examples.size());
    std::iota(indices.begin(), indices.end(), 0);
    assign(std::move(indices), 2);
  }

  DatasetSplit out;
  out.seed = seed;
  out.ratios = ratios;
  out.stratified = stratify;
  std::array<std::vector<LabeledExample>*, 3> targets{&out.train, &out.validation, &out.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::sort(assigned[s].begin(), assigned[s].end());
    for (auto i : assigned[s]) targets[s]->push_back(examples[i]);
  }
  return out;
}

// --- serialization ------------------------------------------------------------------------------

json to_json(const LabeledExample& e) {
  json j;
  j["id"] = e.message.id;
  j["channel_id"] = e.message.channel_id;
  j["timestamp"] = format_timestamp(e.message.timestamp);
  j["raw_text"] = e.message.raw_text;
  j["text"] = e.message.text;
  j["label"] = std::string(to_string(e.label));
  j["annotation"] = e.annotation ? to_json(*e.annotation) : json(nullptr);
  return j;
}

LabeledExample labeled_example_from_json(const json& j) {
  LabeledExample e;
  e.message.id = j.at("id").get<std::string>();
  e.message.channel_id = j.at("channel_id").get<std::string>();
  e.message.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
  e.message.text = j.at("text").get<std::string>();
  e.message.raw_text = j.contains("raw_text") ? j["raw_text"].get<std::string>() : e.message.text;
  e.label = parse_label(j.at("label").get<std::string>());
  if (auto it = j.find("annotation"); it != j.end() && !it->is_null()) e.annotation = annotation_from_json(*it);
  return e;
}

std::string to_jsonl(const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const auto& e : examples) {
    out += to_json(e).dump(-1, ' ', false, json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

std::vector<LabeledExample> read_examples(const std::filesystem::path& path) {
  const auto contents = read_file(path);
  std::vector<LabeledExample> out;
  const auto lines = split_lines(contents);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    try {
      out.push_back(labeled_example_from_json(json::parse(lines[n])));
    } catch (const std::exception& e) {
      throw IngestError(path.string() + ": line " + std::to_string(n + 1) + ": " + e.what());
    }
  }
  return out;
}

namespace {
json class_counts(const std::vector<LabeledExample>& v) {
  const auto pos = std::count_if(v.begin(), v.end(), [](const auto& e) { return e.label == Label::positive; });
  return json{{"total", v.size()}, {"positive", pos}, {"negative", static_cast<std::ptrdiff_t>(v.size()) - pos}};
}
}  // namespace

json split_manifest(const DatasetSplit& s) {
  json j;
  j["seed"] = s.seed;
  j["ratios"] = {s.ratios.train, s.ratios.validation, s.ratios.test};
  j["stratified"] = s.stratified;
  j["counts"] = {{"train", class_counts(s.train)},
                 {"validation", class_counts(s.validation)},
                 {"test", class_counts(s.test)}};
  j["files"] = {{"train", "train.jsonl"}, {"validation", "validation.jsonl"}, {"test", "test.jsonl"}};
  return j;
}

void write_split(const DatasetSplit& s, const std::filesystem::path& dir, const json& extra_manifest) {
  write_file(dir / "train.jsonl", to_jsonl(s.train));
  write_file(dir / "validation.jsonl", to_jsonl(s.validation));
  write_file(dir / "test.jsonl", to_jsonl(s.test));
  json manifest = split_manifest(s);
  for (const auto& [k, v] : extra_manifest.items()) manifest[k] = v;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace ctharness::corpus
