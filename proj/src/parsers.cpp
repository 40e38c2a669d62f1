#include "ctharness/parsers.hpp"

#include <array>
#include <cstdlib>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::parsers {

using corpus::Label;
using nlohmann::json;

namespace {

bool is_strippable(char c) {
  switch (c) {
    case ' ': case '\t': case '\r': case '\n': case '\v': case '\f':
    case '\'': case '"': case '`': case '*': case '.': case '!': case '?': case ',': case ';':
      return true;
    default:
      return false;
  }
}

std::string_view strip_decorations(std::string_view s) {
  while (!s.empty() && is_strippable(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_strippable(s.back())) s.remove_suffix(1);
  return s;
}

// Removes leading answer markers, repeatedly, so "Answer: a) Yes" reduces to "yes".
std::string strip_prefixes(std::string_view lowered) {
  static constexpr std::array<std::string_view, 4> kPrefixes{"label:", "answer:", "a)", "b)"};
  std::string_view s = strip_decorations(lowered);
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto p : kPrefixes) {
      if (s.starts_with(p)) {
        s = strip_decorations(s.substr(p.size()));
        changed = true;
      }
    }
  }
  return std::string(s);
}

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || u >= 0x80;
}

enum class Polarity { none, positive, negative, both };

struct Scan {
  Polarity polarity = Polarity::none;
  bool german = false;
};

Scan scan_words(std::string_view lowered) {
  bool pos = false;
  bool neg = false;
  bool german = false;
  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && !is_word_byte(lowered[i])) ++i;
    const auto start = i;
    while (i < lowered.size() && is_word_byte(lowered[i])) ++i;
    const auto word = lowered.substr(start, i - start);
    if (word == "yes") pos = true;
    else if (word == "no") neg = true;
    else if (word == "ja") pos = german = true;
    else if (word == "nein") neg = german = true;
  }
  Scan s;
  s.german = german;
  s.polarity = pos && neg ? Polarity::both : pos ? Polarity::positive : neg ? Polarity::negative : Polarity::none;
  return s;
}

ParseResult failed() { return ParseResult{std::nullopt, ParseStatus::failed}; }

struct Literal {
  std::string_view text;
  double value = 0.0;
  bool in_range = false;
};

std::vector<Literal> numeric_literals(std::string_view s) {
  std::vector<Literal> out;
  std::size_t i = 0;
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  while (i < s.size()) {
    const bool starts = is_digit(s[i]) || (s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1]));
    const bool glued = i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.');
    if (!starts || glued) {
      ++i;
      continue;
    }
    const auto start = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
      ++i;
      while (i < s.size() && is_digit(s[i])) ++i;
    }
    Literal lit;
    lit.text = s.substr(start, i - start);
    const std::string buf(lit.text);
    lit.value = std::strtod(buf.c_str(), nullptr);
    const bool negative = start > 0 && s[start - 1] == '-';
    const bool percent = i < s.size() && s[i] == '%';
    const bool more_digits_follow = i < s.size() && s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1]);
    lit.in_range = !negative && !percent && !more_digits_follow && lit.value >= 0.0 && lit.value <= 1.0;
    out.push_back(lit);
  }
  return out;
}

}  // namespace

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::clean: return "clean";
    case ParseStatus::recovered: return "recovered";
    case ParseStatus::failed: return "failed";
    case ParseStatus::imported: return "imported";
  }
  return "?";
}

ParseStatus parse_status(std::string_view s) {
  for (auto st : {ParseStatus::clean, ParseStatus::recovered, ParseStatus::failed, ParseStatus::imported}) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown parse status '" + std::string(s) + "'");
}

ParseResult parse_binary(std::string_view raw) {
  if (raw == "Yes") return {Label::positive, ParseStatus::clean};
  if (raw == "No") return {Label::negative, ParseStatus::clean};
  const auto body = strip_prefixes(to_lower_ascii(raw));
  if (body == "1") return {Label::positive, ParseStatus::recovered};
  if (body == "0") return {Label::negative, ParseStatus::recovered};
  const auto scan = scan_words(body);
  switch (scan.polarity) {
    case Polarity::positive: return {Label::positive, ParseStatus::recovered};
    case Polarity::negative: return {Label::negative, ParseStatus::recovered};
    default: return failed();
  }
}

ParseResult parse_probability(std::string_view raw) {
  std::optional<Literal> chosen;
  for (const auto& lit : numeric_literals(raw)) {
    if (!lit.in_range) continue;
    if (!chosen) {
      chosen = lit;
    } else if (chosen->value != lit.value) {
      return failed();
    }
  }
  if (!chosen) return failed();
  const auto status = raw == chosen->text ? ParseStatus::clean : ParseStatus::recovered;
  return {chosen->value, status};
}

ParseResult parse_few_shot_label(std::string_view raw) {
  if (raw == "Yes") return {Label::positive, ParseStatus::clean};
  if (raw == "No") return {Label::negative, ParseStatus::clean};
  for (const auto& line : split_lines(raw)) {
    if (trim(line).empty()) continue;
    auto r = parse_binary(line);
    if (r.verdict) return {r.verdict, ParseStatus::recovered};
  }
  return failed();
}

ParseResult parse_for_task(prompt::Task task, std::string_view raw) {
  switch (task) {
    case prompt::Task::zero_shot_binary: return parse_binary(raw);
    case prompt::Task::zero_shot_probabilistic: return parse_probability(raw);
    case prompt::Task::few_shot_binary: return parse_few_shot_label(raw);
  }
  return failed();
}

Prediction make_prediction(std::string message_id, std::string raw_output, prompt::Task task) {
  auto r = parse_for_task(task, raw_output);
  return Prediction{std::move(message_id), r.verdict, std::move(raw_output), r.status};
}

bool is_score(const Verdict& v) { return std::holds_alternative<double>(v); }
bool is_label(const Verdict& v) { return std::holds_alternative<Label>(v); }

json to_json(const Prediction& p) {
  json j;
  j["message_id"] = p.message_id;
  j["label"] = nullptr;
  j["score"] = nullptr;
  if (p.verdict) {
    if (const auto* l = std::get_if<Label>(&*p.verdict)) j["label"] = std::string(corpus::to_string(*l));
    if (const auto* s = std::get_if<double>(&*p.verdict)) j["score"] = *s;
  }
  j["raw_output"] = p.raw_output;
  j["parse_status"] = std::string(to_string(p.status));
  return j;
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  p.message_id = j.at("message_id").get<std::string>();
  p.raw_output = j.value("raw_output", std::string());
  p.status = parse_status(j.at("parse_status").get<std::string>());
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) p.verdict = corpus::parse_label(it->get<std::string>());
  if (auto it = j.find("score"); it != j.end() && !it->is_null()) p.verdict = it->get<double>();
  if (p.verdict.has_value() == (p.status == ParseStatus::failed)) {
    throw ValidationError("prediction '" + p.message_id + "': verdict presence contradicts its parse status");
  }
  return p;
}

std::string to_jsonl(const std::vector<Prediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    out += to_json(p).dump(-1, ' ', false, json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  const auto lines = split_lines(read_file(path));
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    try {
      out.push_back(prediction_from_json(json::parse(lines[n])));
    } catch (const std::exception& e) {
      throw IngestError(path.string() + ": line " + std::to_string(n + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ctharness::parsers
