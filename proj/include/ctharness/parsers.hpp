#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ctharness/corpus.hpp"
#include "ctharness/prompt_kit.hpp"

namespace ctharness::parsers {

enum class ParseStatus { clean, recovered, failed, imported };

// Either a binary label or a probability score in [0, 1].
using Verdict = std::variant<corpus::Label, double>;

struct ParseResult {
  std::optional<Verdict> verdict;
  ParseStatus status = ParseStatus::failed;
};

struct Prediction {
  std::string message_id;
  std::optional<Verdict> verdict;
  std::string raw_output;
  ParseStatus status = ParseStatus::failed;
};

std::string_view to_string(ParseStatus s);
ParseStatus parse_status(std::string_view s);

// Yes/No answers, optionally prefixed by "a)", "b)", "label:" or "answer:".
// A lone "1"/"0" is accepted, as are "Ja"/"Nein". Answers naming both
// polarities fail.
ParseResult parse_binary(std::string_view raw);

// The single distinct decimal literal in [0, 1]; out-of-range values are never clamped.
ParseResult parse_probability(std::string_view raw);

// Binary alphabet applied line by line; the first line that parses wins.
ParseResult parse_few_shot_label(std::string_view raw);

ParseResult parse_for_task(prompt::Task task, std::string_view raw);
Prediction make_prediction(std::string message_id, std::string raw_output, prompt::Task task);

bool is_score(const Verdict& v);
bool is_label(const Verdict& v);

nlohmann::json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);
std::string to_jsonl(const std::vector<Prediction>& predictions);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace ctharness::parsers
