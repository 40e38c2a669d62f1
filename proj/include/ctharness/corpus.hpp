#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ctharness::corpus {

using Timestamp = std::chrono::sys_seconds;

// Accepts YYYY-MM-DD (midnight) or YYYY-MM-DD[T ]HH:MM:SS[.frac][Z|+HH:MM|-HH:MM]; a missing offset means UTC.
Timestamp parse_timestamp(std::string_view iso);
std::string format_timestamp(Timestamp ts);  // YYYY-MM-DDTHH:MM:SSZ

struct Message {
  std::string id;
  std::string channel_id;
  Timestamp timestamp{};
  std::string raw_text;
  std::string text;  // cleaned; equals raw_text until preprocess runs
};

enum class Stance {
  belief,
  authenticating,
  directive,
  rhetorical_question,
  disbelief,
  neutral,
  uncertain,
};

enum class Component { actor, strategy, goal };

struct Annotation {
  bool ct_present = false;
  std::optional<Stance> stance;
  std::set<Component> components;
  bool reference_only = false;

  // Throws ValidationError when the fields contradict each other.
  void validate() const;
};

enum class Label { negative = 0, positive = 1 };
enum class LabelDecision { negative, positive, excluded };

struct Record {
  Message message;
  std::optional<Annotation> annotation;
};

struct LabeledExample {
  Message message;
  Label label = Label::negative;
  std::optional<Annotation> annotation;
};

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  bool stratified = true;
};

enum class InputFormat { jsonl, csv };

enum class EmojiPolicy { keep, strip };

// Per-channel trailing line blocks that count as footers.
struct FooterIndex {
  std::map<std::string, std::set<std::string>> by_channel;
  std::size_t max_lines = 8;
};

struct PreprocessRules {
  bool remove_urls = true;
  bool remove_handles = true;
  bool remove_ibans = true;
  EmojiPolicy emoji = EmojiPolicy::keep;
  bool remove_footers = true;
  FooterIndex footers;
};

std::string_view to_string(Stance s);
std::string_view to_string(Component c);
std::string_view to_string(Label l);
std::string_view to_string(LabelDecision d);
std::string_view to_string(InputFormat f);
std::string_view to_string(EmojiPolicy p);
Stance parse_stance(std::string_view s);
Component parse_component(std::string_view s);
Label parse_label(std::string_view s);
InputFormat parse_input_format(std::string_view s);
EmojiPolicy parse_emoji_policy(std::string_view s);

// --- ingestion --------------------------------------------------------------

std::vector<Record> ingest(const std::filesystem::path& path, InputFormat format);
std::vector<Record> ingest_jsonl(std::string_view contents);
std::vector<Record> ingest_csv(std::string_view contents);

// --- cleaning ---------------------------------------------------------------

// Scans every channel for trailing line blocks shared by at least
// `min_occurrences` distinct messages. A block must leave at least one line
// of body above it to count.
FooterIndex detect_footers(const std::vector<Message>& messages, std::size_t min_occurrences,
                           std::size_t max_lines = 8);

std::string clean_text(std::string_view text, std::string_view channel_id,
                       const PreprocessRules& rules);
Message preprocess(const Message& message, const PreprocessRules& rules);

// --- labelling and filtering --------------------------------------------------

LabelDecision derive_label(const Annotation& annotation);

std::size_t token_count(std::string_view text);
std::vector<LabeledExample> filter_short(const std::vector<LabeledExample>& examples,
                                         std::size_t min_tokens);
std::vector<LabeledExample> dedupe(const std::vector<LabeledExample>& examples);

DatasetSplit split(const std::vector<LabeledExample>& examples, const SplitRatios& ratios,
                   std::uint64_t seed, bool stratify);

// Largest-remainder allocation of n items over the three ratios.
std::array<std::size_t, 3> allocate_counts(std::size_t n, const SplitRatios& ratios);

int fragmentation_score(const Annotation& annotation);

// --- serialization ------------------------------------------------------------

nlohmann::json to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LabeledExample& e);
LabeledExample labeled_example_from_json(const nlohmann::json& j);

std::string to_jsonl(const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> read_examples(const std::filesystem::path& path);

nlohmann::json split_manifest(const DatasetSplit& s);
void write_split(const DatasetSplit& s, const std::filesystem::path& dir,
                 const nlohmann::json& extra_manifest = nlohmann::json::object());

}  // namespace ctharness::corpus
