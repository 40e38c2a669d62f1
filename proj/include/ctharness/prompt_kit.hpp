#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctharness/corpus.hpp"

namespace ctharness::sampler {
struct FewShotSet;
}

namespace ctharness::prompt {

inline constexpr std::string_view kTemplateVersion = "1";

enum class Task { zero_shot_binary, zero_shot_probabilistic, few_shot_binary };
enum class Dialect { gpt, llama };
enum class DefinitionKind { custom, lorem_ipsum, none };

// Expert definition of a conspiracy theory used in the "custom" variant.
extern const std::string_view kCustomDefinition;
// 100-word placebo definition.
extern const std::string_view kLoremIpsumDefinition;
extern const std::string_view kDefaultSystemPrompt;

struct DefinitionVariant {
  DefinitionKind kind = DefinitionKind::custom;
  std::string text;

  static DefinitionVariant of(DefinitionKind kind);
};

struct PromptSpec {
  Task task = Task::zero_shot_binary;
  DefinitionVariant definition = DefinitionVariant::of(DefinitionKind::custom);
  Dialect dialect = Dialect::gpt;
  std::string system_prompt{kDefaultSystemPrompt};

  void validate() const;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
  std::string message_id;
  PromptSpec spec;
};

std::string_view to_string(Task t);
std::string_view to_string(Dialect d);
std::string_view to_string(DefinitionKind k);
Task parse_task(std::string_view s);
Dialect parse_dialect(std::string_view s);
DefinitionKind parse_definition_kind(std::string_view s);

// Single pass: substituted values are never rescanned, so a message that
// happens to contain "{definition}" is embedded literally.
std::string expand(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

RenderedPrompt render_zero_shot_binary(const corpus::Message& message, const PromptSpec& spec);
RenderedPrompt render_zero_shot_probabilistic(const corpus::Message& message, const PromptSpec& spec);
RenderedPrompt render_few_shot(const corpus::Message& message, const sampler::FewShotSet& examples,
                               const PromptSpec& spec);

// Dispatches on spec.task; few-shot specs require `examples`.
RenderedPrompt render(const corpus::Message& message, const PromptSpec& spec,
                      const sampler::FewShotSet* examples = nullptr);

std::string label_text(corpus::Label label);

// Every template with placeholders left in place, for auditing.
struct TemplateDump {
  std::string name;
  std::string text;
};
std::vector<TemplateDump> dump_templates();

nlohmann::json to_json(const PromptSpec& spec);
PromptSpec prompt_spec_from_json(const nlohmann::json& j);

}  // namespace ctharness::prompt
