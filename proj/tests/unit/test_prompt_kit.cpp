#include <doctest.h>

#include "ctharness/error.hpp"
#include "ctharness/prompt_kit.hpp"
#include "ctharness/sampler.hpp"
#include "ctharness/util.hpp"

using namespace ctharness;
using namespace ctharness::prompt;

namespace {

corpus::Message message(std::string id, std::string text) {
  corpus::Message m;
  m.id = std::move(id);
  m.channel_id = "c";
  m.raw_text = text;
  m.text = std::move(text);
  return m;
}

PromptSpec spec_for(Task task, DefinitionKind kind, Dialect dialect) {
  PromptSpec s;
  s.task = task;
  s.definition = DefinitionVariant::of(kind);
  s.dialect = dialect;
  return s;
}

std::size_t occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

sampler::FewShotSet few_shot_set(std::size_t n) {
  sampler::FewShotSet set;
  for (std::size_t i = 0; i < n; ++i) {
    corpus::LabeledExample e;
    e.message = message("ex" + std::to_string(i), "Beispiel Nummer " + std::to_string(i));
    e.label = i % 2 ? corpus::Label::positive : corpus::Label::negative;
    set.items.push_back(e);
  }
  return set;
}

const std::string kGptConstraint = "Do not provide any other outputs or any explanation for your output.";
const std::string kLlamaBinary = "Answer in one line, only use Yes or No.";

}  // namespace

TEST_CASE("definitions") {
  CHECK(whitespace_tokens(kLoremIpsumDefinition).size() == 100);
  CHECK(kCustomDefinition.starts_with("Conspiracy theories formulate the strong belief"));
  CHECK(kCustomDefinition.ends_with("only referenced in a text via certain codes or hashtags."));
  CHECK(DefinitionVariant::of(DefinitionKind::none).text.empty());
  CHECK(DefinitionVariant::of(DefinitionKind::custom).text == kCustomDefinition);
  CHECK(kDefaultSystemPrompt ==
        "You are a data annotation expert trained to identify conspiracy theories on social media.");
}

TEST_CASE("zero-shot binary prompts") {
  const auto m = message("m1", "Die da oben planen alles.");
  const auto p = render_zero_shot_binary(m, spec_for(Task::zero_shot_binary, DefinitionKind::custom, Dialect::gpt));
  CHECK(p.system == kDefaultSystemPrompt);
  CHECK(p.message_id == "m1");
  CHECK(p.user ==
        "Consider the following message: 'Die da oben planen alles.'. You have to decide whether the message "
        "communicates a conspiracy theory considering the following definition: '" +
            std::string(kCustomDefinition) +
            "'. Give your answer using one of the two options:\na) Yes\nb) No\n" + kGptConstraint);

  const auto q = render_zero_shot_binary(m, spec_for(Task::zero_shot_binary, DefinitionKind::none, Dialect::llama));
  CHECK(q.user.find("communicates a conspiracy theory or not. Give your answer") != std::string::npos);
  CHECK(q.user.ends_with(kLlamaBinary));
  CHECK(q.user.find(kGptConstraint) == std::string::npos);
  CHECK(q.user.find("definition") == std::string::npos);

  CHECK_THROWS_AS(render_zero_shot_binary(message("e", ""), spec_for(Task::zero_shot_binary, DefinitionKind::none, Dialect::gpt)),
                  RenderError);
  CHECK_THROWS_AS(render_zero_shot_binary(m, spec_for(Task::zero_shot_probabilistic, DefinitionKind::none, Dialect::gpt)),
                  RenderError);
}

TEST_CASE("zero-shot probabilistic prompts") {
  const auto m = message("m2", "Alles nur Zufall?");
  auto p = render_zero_shot_probabilistic(m, spec_for(Task::zero_shot_probabilistic, DefinitionKind::custom, Dialect::gpt));
  CHECK(p.user.starts_with("Consider the following message:'Alles nur Zufall?'."));
  CHECK(p.user.find("probability score between 0 to 1") != std::string::npos);
  CHECK(p.user.ends_with(kGptConstraint));

  p = render_zero_shot_probabilistic(m, spec_for(Task::zero_shot_probabilistic, DefinitionKind::lorem_ipsum, Dialect::gpt));
  CHECK(occurrences(p.user, kLoremIpsumDefinition) == 1);

  p = render_zero_shot_probabilistic(m, spec_for(Task::zero_shot_probabilistic, DefinitionKind::none, Dialect::llama));
  CHECK(p.user.find("conspiracy theory or not.") != std::string::npos);
  CHECK(p.user.ends_with("The score is: "));
  CHECK(p.user.find("Answer in one line, only return the score.") != std::string::npos);
}

TEST_CASE("few-shot prompts") {
  const auto m = message("target", "Zielnachricht hier");
  const auto set = few_shot_set(14);
  const auto spec = spec_for(Task::few_shot_binary, DefinitionKind::none, Dialect::gpt);
  const auto p = render_few_shot(m, set, spec);
  CHECK(p.user.starts_with("You have to decide whether the message communicates a conspiracy theory or not.\nExamples:\n"
                           "message: Beispiel Nummer 0\nlabel: No\nmessage: Beispiel Nummer 1\nlabel: Yes\n"));
  CHECK(p.user.ends_with("message: Beispiel Nummer 13\nlabel: Yes\nmessage: Zielnachricht hier\nlabel: "));
  CHECK(occurrences(p.user, "message: ") == 15);

  const auto q = render_few_shot(m, set, spec_for(Task::few_shot_binary, DefinitionKind::none, Dialect::llama));
  CHECK(q.user.ends_with("Answer in one line, only return the label.\nmessage: Zielnachricht hier\nLabel: "));

  CHECK_THROWS_AS(render_few_shot(m, few_shot_set(13), spec), RenderError);
  CHECK_THROWS_AS(render_few_shot(set.items[3].message, set, spec), RenderError);
  CHECK_THROWS_AS(render_few_shot(m, set, spec_for(Task::few_shot_binary, DefinitionKind::custom, Dialect::gpt)),
                  RenderError);
  CHECK(render(m, spec, &set).user == p.user);
  CHECK_THROWS_AS(render(m, spec), RenderError);
}

TEST_CASE("rendering properties") {
  Rng rng(8);
  const auto set = few_shot_set(14);
  const std::vector<std::string> words{"Impfung", "Regierung", "'zitat'", "{message}", "{definition}", "Plan", "\xC3\xBC", "ja", "?"};
  for (int i = 0; i < 200; ++i) {
    std::string text = "Ziel" + std::to_string(i);
    for (std::uint64_t k = rng.below(8); k > 0; --k) text += " " + words[rng.below(words.size())];
    const auto m = message("t" + std::to_string(i), text);
    for (auto task : {Task::zero_shot_binary, Task::zero_shot_probabilistic, Task::few_shot_binary}) {
      for (auto kind : {DefinitionKind::custom, DefinitionKind::lorem_ipsum, DefinitionKind::none}) {
        if (task == Task::few_shot_binary && kind != DefinitionKind::none) continue;
        for (auto dialect : {Dialect::gpt, Dialect::llama}) {
          const auto spec = spec_for(task, kind, dialect);
          const auto a = render(m, spec, &set);
          const auto b = render(m, spec, &set);
          CHECK(a.user == b.user);
          CHECK(a.system == b.system);
          CAPTURE(text);
          CHECK(occurrences(a.user, text) == 1);
          if (kind == DefinitionKind::none) {
            CHECK(a.user.find("Lorem") == std::string::npos);
            CHECK(a.user.find("formulate the strong belief") == std::string::npos);
          } else {
            CHECK(occurrences(a.user, spec.definition.text) == 1);
          }
          const bool gpt_suffix = a.user.ends_with(kGptConstraint) || a.user.ends_with("label: ");
          const bool llama_suffix = a.user.ends_with(kLlamaBinary) || a.user.ends_with("The score is: ") ||
                                    a.user.ends_with("Label: ");
          CHECK(gpt_suffix != llama_suffix);
          CHECK((dialect == Dialect::gpt) == gpt_suffix);
        }
      }
    }
  }
}

TEST_CASE("placeholder expansion is single pass") {
  const std::map<std::string, std::string, std::less<>> values{{"a", "{b}"}, {"b", "x"}};
  CHECK(expand("[{a}] [{b}] [{c}]", values) == "[{b}] [x] [{c}]");
}

TEST_CASE("template dump and spec JSON") {
  const auto dump = dump_templates();
  CHECK(dump.size() == 13);
  CHECK(dump.front().name == "system");
  const auto spec = spec_for(Task::zero_shot_probabilistic, DefinitionKind::lorem_ipsum, Dialect::llama);
  const auto back = prompt_spec_from_json(to_json(spec));
  CHECK(back.task == spec.task);
  CHECK(back.definition.kind == spec.definition.kind);
  CHECK(back.definition.text == spec.definition.text);
  CHECK(back.dialect == spec.dialect);
  CHECK(back.system_prompt == spec.system_prompt);
  CHECK(parse_task("few-shot-binary") == Task::few_shot_binary);
  CHECK(parse_definition_kind("lorem-ipsum") == DefinitionKind::lorem_ipsum);
  CHECK_THROWS(parse_dialect("mistral"));
}
