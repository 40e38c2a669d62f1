#include "ctharness/prompt_kit.hpp"

#include <array>

#include "ctharness/error.hpp"
#include "ctharness/sampler.hpp"

namespace ctharness::prompt {

using nlohmann::json;

const std::string_view kCustomDefinition =
    "Conspiracy theories formulate the strong belief that a secret group of people, who have the evil goal of "
    "taking over institutions, countries, or the world, intentionally cause complex, and in most cases unsolved, "
    "events and phenomena. Conspiracy theories can be considered an effort to explain some event or practice by "
    "reference to the machinations of powerful people, who have managed to conceal their role. Such a narrative "
    "is based on a simple dualism between good and evil which leaves no space for unintentional, unforeseeable "
    "things or mistakes to happen. A conspiracy theory typically involves actors who use a strategy to pursue a "
    "concrete malicious goal. Often, conspiracy theories are communicated in a fragmented way, so that not all of "
    "these components need to be present in a text. In some cases, a conspiracy theory is not explicitly "
    "articulated, but only referenced in a text via certain codes or hashtags.";

const std::string_view kLoremIpsumDefinition =
    "Lorem ipsum dolor sit amet, consectetur adipiscing elit, sed do eiusmod tempor incididunt ut labore et dolore "
    "magna aliqua. Ut enim ad minim veniam, quis nostrud exercitation ullamco laboris nisi ut aliquip ex ea commodo "
    "consequat. Duis aute irure dolor in reprehenderit in voluptate velit esse cillum dolore eu fugiat nulla "
    "pariatur. Excepteur sint occaecat cupidatat non proident, sunt in culpa qui officia deserunt mollit anim id "
    "est laborum. Sed ut perspiciatis unde omnis iste natus error sit voluptatem accusantium doloremque "
    "laudantium, totam rem aperiam, eaque ipsa quae ab illo inventore veritatis et quasi architecto beatae vitae "
    "dicta sunt explicabo.";

const std::string_view kDefaultSystemPrompt =
    "You are a data annotation expert trained to identify conspiracy theories on social media.";

namespace {

// Templates, version kTemplateVersion. Placeholders: {message}, {definition}, {examples}.
// The probabilistic instruction keeps its unbalanced opening parenthesis verbatim.
constexpr std::string_view kBinaryWithDefinition =
    "Consider the following message: '{message}'. You have to decide whether the message communicates a "
    "conspiracy theory considering the following definition: '{definition}'. Give your answer using one of the "
    "two options:\na) Yes\nb) No";
constexpr std::string_view kBinaryWithoutDefinition =
    "Consider the following message: '{message}'. You have to decide whether the message communicates a "
    "conspiracy theory or not. Give your answer using one of the two options:\na) Yes\nb) No";

constexpr std::string_view kProbabilisticWithDefinition =
    "Consider the following message:'{message}'. You have to decide whether the message communicates a "
    "conspiracy theory (considering the following definition: '{definition}'. I want you to provide a "
    "probability score between 0 to 1 where the score represents the probability that the message communicates "
    "a conspiracy theory. A probability of 1 means that the comment is highly likely to communicate a conspiracy "
    "theory.";
constexpr std::string_view kProbabilisticWithoutDefinition =
    "Consider the following message:'{message}'. You have to decide whether the message communicates a "
    "conspiracy theory or not. I want you to provide a probability score between 0 to 1 where the score "
    "represents the probability that the message communicates a conspiracy theory. A probability of 1 means that "
    "the comment is highly likely to communicate a conspiracy theory.";

constexpr std::string_view kGptConstraint = "Do not provide any other outputs or any explanation for your output.";
constexpr std::string_view kLlamaBinaryConstraint = "Answer in one line, only use Yes or No.";
constexpr std::string_view kLlamaScoreConstraint =
    "Answer in one line, only return the score. Do not provide any other outputs or any explanation for your "
    "output. The score is: ";

constexpr std::string_view kFewShotInstruction =
    "You have to decide whether the message communicates a conspiracy theory or not.\nExamples:\n{examples}";
constexpr std::string_view kFewShotExample = "message: {message}\nlabel: {label}";
constexpr std::string_view kFewShotGptTarget = "message: {message}\nlabel: ";
constexpr std::string_view kFewShotLlamaTarget =
    "Answer in one line, only return the label.\nmessage: {message}\nLabel: ";

constexpr std::size_t kFewShotSize = 14;

using Values = std::map<std::string, std::string, std::less<>>;

void require_text(const corpus::Message& m) {
  if (m.text.empty()) throw RenderError("message '" + m.id + "' has empty text");
}

void require_task(const PromptSpec& spec, Task expected) {
  spec.validate();
  if (spec.task != expected) {
    throw RenderError("prompt spec task is " + std::string(to_string(spec.task)) + ", expected " +
                      std::string(to_string(expected)));
  }
}

RenderedPrompt make(const corpus::Message& m, const PromptSpec& spec, std::string user) {
  return RenderedPrompt{spec.system_prompt, std::move(user), m.id, spec};
}

}  // namespace

DefinitionVariant DefinitionVariant::of(DefinitionKind kind) {
  switch (kind) {
    case DefinitionKind::custom: return {kind, std::string(kCustomDefinition)};
    case DefinitionKind::lorem_ipsum: return {kind, std::string(kLoremIpsumDefinition)};
    case DefinitionKind::none: return {kind, {}};
  }
  return {kind, {}};
}

void PromptSpec::validate() const {
  if ((definition.kind == DefinitionKind::none) != definition.text.empty()) {
    throw RenderError("definition text must be empty exactly when the definition kind is none");
  }
  if (task == Task::few_shot_binary && definition.kind != DefinitionKind::none) {
    throw RenderError("few-shot prompts carry no definition");
  }
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::zero_shot_binary: return "zero-shot-binary";
    case Task::zero_shot_probabilistic: return "zero-shot-probabilistic";
    case Task::few_shot_binary: return "few-shot-binary";
  }
  return "?";
}
std::string_view to_string(Dialect d) { return d == Dialect::gpt ? "gpt" : "llama"; }
std::string_view to_string(DefinitionKind k) {
  switch (k) {
    case DefinitionKind::custom: return "custom";
    case DefinitionKind::lorem_ipsum: return "lorem-ipsum";
    case DefinitionKind::none: return "none";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  for (Task t : {Task::zero_shot_binary, Task::zero_shot_probabilistic, Task::few_shot_binary}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown task '" + std::string(s) + "'");
}
Dialect parse_dialect(std::string_view s) {
  if (s == "gpt") return Dialect::gpt;
  if (s == "llama") return Dialect::llama;
  throw ConfigError("unknown dialect '" + std::string(s) + "'");
}
DefinitionKind parse_definition_kind(std::string_view s) {
  for (DefinitionKind k : {DefinitionKind::custom, DefinitionKind::lorem_ipsum, DefinitionKind::none}) {
    if (to_string(k) == s) return k;
  }
  if (s == "lorem_ipsum") return DefinitionKind::lorem_ipsum;
  throw ConfigError("unknown definition '" + std::string(s) + "'");
}

std::string expand(std::string_view tmpl, const Values& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        if (auto it = values.find(name); it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string label_text(corpus::Label label) { return label == corpus::Label::positive ? "Yes" : "No"; }

RenderedPrompt render_zero_shot_binary(const corpus::Message& message, const PromptSpec& spec) {
  require_task(spec, Task::zero_shot_binary);
  require_text(message);
  const bool with_def = spec.definition.kind != DefinitionKind::none;
  std::string user = expand(with_def ? kBinaryWithDefinition : kBinaryWithoutDefinition,
                            Values{{"message", message.text}, {"definition", spec.definition.text}});
  user.push_back('\n');
  user += spec.dialect == Dialect::gpt ? kGptConstraint : kLlamaBinaryConstraint;
  return make(message, spec, std::move(user));
}

RenderedPrompt render_zero_shot_probabilistic(const corpus::Message& message, const PromptSpec& spec) {
  require_task(spec, Task::zero_shot_probabilistic);
  require_text(message);
  const bool with_def = spec.definition.kind != DefinitionKind::none;
  std::string user = expand(with_def ? kProbabilisticWithDefinition : kProbabilisticWithoutDefinition,
                            Values{{"message", message.text}, {"definition", spec.definition.text}});
  user.push_back('\n');
  user += spec.dialect == Dialect::gpt ? kGptConstraint : kLlamaScoreConstraint;
  return make(message, spec, std::move(user));
}

RenderedPrompt render_few_shot(const corpus::Message& message, const sampler::FewShotSet& examples,
                               const PromptSpec& spec) {
  require_task(spec, Task::few_shot_binary);
  require_text(message);
  if (examples.items.size() != kFewShotSize) {
    throw RenderError("few-shot prompts need exactly " + std::to_string(kFewShotSize) + " examples, got " +
                      std::to_string(examples.items.size()));
  }
  std::string block;
  for (const auto& ex : examples.items) {
    if (ex.message.id == message.id) {
      throw RenderError("target message '" + message.id + "' is also one of the in-context examples");
    }
    block += expand(kFewShotExample, Values{{"message", ex.message.text}, {"label", label_text(ex.label)}});
    block.push_back('\n');
  }
  std::string user = expand(kFewShotInstruction, Values{{"examples", block}});
  user += expand(spec.dialect == Dialect::gpt ? kFewShotGptTarget : kFewShotLlamaTarget,
                 Values{{"message", message.text}});
  return make(message, spec, std::move(user));
}

RenderedPrompt render(const corpus::Message& message, const PromptSpec& spec, const sampler::FewShotSet* examples) {
  switch (spec.task) {
    case Task::zero_shot_binary: return render_zero_shot_binary(message, spec);
    case Task::zero_shot_probabilistic: return render_zero_shot_probabilistic(message, spec);
    case Task::few_shot_binary:
      if (!examples) throw RenderError("few-shot rendering requires an example set");
      return render_few_shot(message, *examples, spec);
  }
  throw RenderError("unknown task");
}

std::vector<TemplateDump> dump_templates() {
  auto with = [](std::string_view a, std::string_view b) { return std::string(a) + "\n" + std::string(b); };
  const std::string few_examples =
      "message: {message_1}\nlabel: {label_1}\n...\nmessage: {message_14}\nlabel: {label_14}\n";
  const std::string few_head = expand(kFewShotInstruction, Values{{"examples", few_examples}});
  return {
      {"system", std::string(kDefaultSystemPrompt)},
      {"definition/custom", std::string(kCustomDefinition)},
      {"definition/lorem-ipsum", std::string(kLoremIpsumDefinition)},
      {"zero-shot-binary/definition/gpt", with(kBinaryWithDefinition, kGptConstraint)},
      {"zero-shot-binary/definition/llama", with(kBinaryWithDefinition, kLlamaBinaryConstraint)},
      {"zero-shot-binary/none/gpt", with(kBinaryWithoutDefinition, kGptConstraint)},
      {"zero-shot-binary/none/llama", with(kBinaryWithoutDefinition, kLlamaBinaryConstraint)},
      {"zero-shot-probabilistic/definition/gpt", with(kProbabilisticWithDefinition, kGptConstraint)},
      {"zero-shot-probabilistic/definition/llama", with(kProbabilisticWithDefinition, kLlamaScoreConstraint)},
      {"zero-shot-probabilistic/none/gpt", with(kProbabilisticWithoutDefinition, kGptConstraint)},
      {"zero-shot-probabilistic/none/llama", with(kProbabilisticWithoutDefinition, kLlamaScoreConstraint)},
      {"few-shot-binary/gpt", few_head + std::string(kFewShotGptTarget)},
      {"few-shot-binary/llama", few_head + std::string(kFewShotLlamaTarget)},
  };
}

json to_json(const PromptSpec& spec) {
  return json{{"task", std::string(to_string(spec.task))},
              {"definition", std::string(to_string(spec.definition.kind))},
              {"dialect", std::string(to_string(spec.dialect))},
              {"system_prompt", spec.system_prompt},
              {"template_version", std::string(kTemplateVersion)}};
}

PromptSpec prompt_spec_from_json(const json& j) {
  PromptSpec spec;
  spec.task = parse_task(j.at("task").get<std::string>());
  spec.definition = DefinitionVariant::of(parse_definition_kind(j.at("definition").get<std::string>()));
  spec.dialect = parse_dialect(j.at("dialect").get<std::string>());
  if (j.contains("system_prompt")) spec.system_prompt = j["system_prompt"].get<std::string>();
  return spec;
}

}  // namespace ctharness::prompt
