// Writes a replay fixture of synthetic model outputs for a prepared data
// directory. Outputs are noisy on purpose (prefixes, casing, stray text, the
// odd unparsable answer) so the replay path exercises every parser branch.
#include <CLI11.hpp>

#include <iostream>

#include "ctharness/corpus.hpp"
#include "ctharness/model_gateway.hpp"
#include "ctharness/prompt_kit.hpp"
#include "ctharness/sampler.hpp"
#include "ctharness/util.hpp"

namespace fs = std::filesystem;
using namespace ctharness;

namespace {

std::string pick(Rng& rng, const std::vector<std::string>& options) {
  return options[static_cast<std::size_t>(rng.below(options.size()))];
}

std::string binary_output(Rng& rng, corpus::Label gold, double accuracy) {
  if (rng.unit() < 0.03) return pick(rng, {"I cannot determine this.", "", "Yes or No?"});
  const bool say_yes = (gold == corpus::Label::positive) == (rng.unit() < accuracy);
  if (rng.unit() < 0.7) return say_yes ? "Yes" : "No";
  return say_yes ? pick(rng, {"Yes.", " yes\n", "Answer: Yes", "**Yes**", "Ja", "Label: Yes"})
                 : pick(rng, {"No.", "no", "Answer: No", "**No**", "Nein", "Label: No"});
}

std::string score_output(Rng& rng, corpus::Label gold) {
  if (rng.unit() < 0.03) return pick(rng, {"Unclear.", "between 0.2 and 0.4"});
  const double lo = gold == corpus::Label::positive ? 0.45 : 0.0;
  const double score = std::round((lo + 0.5 * rng.unit()) * 100.0) / 100.0;
  const auto text = format_fixed(score, 2);
  if (rng.unit() < 0.75) return text;
  return pick(rng, {"Score: ", "The score is: ", " "}) + text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic replay fixture generator"};
  std::string data;
  std::string out;
  std::string fewshot;
  std::uint64_t seed = 7;
  app.add_option("--data", data, "prepared data directory")->required();
  app.add_option("--out", out, "fixture path")->required();
  app.add_option("--fewshot", fewshot, "few-shot manifest; adds few-shot prompts for every set");
  app.add_option("--seed", seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::vector<sampler::FewShotSet> sets;
  if (!fewshot.empty()) sets = sampler::read_manifest(fewshot);

  std::vector<prompt::PromptSpec> specs;
  for (auto dialect : {prompt::Dialect::gpt, prompt::Dialect::llama}) {
    for (auto kind : {prompt::DefinitionKind::custom, prompt::DefinitionKind::lorem_ipsum, prompt::DefinitionKind::none}) {
      prompt::PromptSpec spec;
      spec.dialect = dialect;
      spec.definition = prompt::DefinitionVariant::of(kind);
      spec.task = prompt::Task::zero_shot_binary;
      specs.push_back(spec);
      spec.task = prompt::Task::zero_shot_probabilistic;
      specs.push_back(spec);
      if (!sets.empty() && kind == prompt::DefinitionKind::none) {
        spec.task = prompt::Task::few_shot_binary;
        specs.push_back(spec);
      }
    }
  }

  std::string lines;
  std::size_t n = 0;
  for (const char* split : {"train", "validation", "test"}) {
    for (const auto& e : corpus::read_examples(fs::path(data) / (std::string(split) + ".jsonl"))) {
      for (const auto& spec : specs) {
        const std::size_t variants = spec.task == prompt::Task::few_shot_binary ? sets.size() : 1;
        for (std::size_t k = 0; k < variants; ++k) {
          const auto* shots = spec.task == prompt::Task::few_shot_binary ? &sets[k] : nullptr;
          if (shots) {
            bool inside = false;
            for (const auto& item : shots->items) inside = inside || item.message.id == e.message.id;
            if (inside) continue;
          }
          const auto p = prompt::render(e.message, spec, shots);
          gateway::LedgerEntry entry;
          entry.digest = gateway::prompt_digest(p);
          Rng rng(mix_seed(seed, std::stoull(entry.digest.substr(0, 16), nullptr, 16)));
          entry.response.message_id = e.message.id;
          const double accuracy = spec.definition.kind == prompt::DefinitionKind::custom ? 0.85 : 0.75;
          entry.response.raw_output = spec.task == prompt::Task::zero_shot_probabilistic
                                          ? score_output(rng, e.label)
                                          : binary_output(rng, e.label, accuracy);
          entry.response.token_usage = {p.system.size() / 4 + p.user.size() / 4, 1};
          lines += gateway::to_json(entry).dump() + "\n";
          ++n;
        }
      }
    }
  }
  write_file(out, lines);
  std::cout << "wrote " << n << " recorded responses -> " << out << "\n";
  return 0;
}
