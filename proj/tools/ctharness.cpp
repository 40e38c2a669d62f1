// Command-line driver for the evaluation pipeline.
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <unordered_set>

#include "ctharness/analysis.hpp"
#include "ctharness/config.hpp"
#include "ctharness/corpus.hpp"
#include "ctharness/error.hpp"
#include "ctharness/eval.hpp"
#include "ctharness/model_gateway.hpp"
#include "ctharness/parsers.hpp"
#include "ctharness/prompt_kit.hpp"
#include "ctharness/sampler.hpp"
#include "ctharness/stats.hpp"
#include "ctharness/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctharness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;

std::string dump(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") std::cout << text;
  else write_file(out, text);
}

std::vector<double> parse_ratios(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = std::string(trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    char* end = nullptr;
    const double v = std::strtod(piece.c_str(), &end);
    if (piece.empty() || *end != '\0') throw ConfigError("ratios must be three comma-separated numbers: " + s);
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() != 3) throw ConfigError("ratios must be three comma-separated numbers: " + s);
  return out;
}

// --- prepare ---------------------------------------------------------------------------------

struct PrepareOptions {
  std::vector<std::string> inputs;
  std::string format = "jsonl";
  std::string out = "data";
  std::uint64_t seed = 42;
  std::string ratios = "0.8,0.1,0.1";
  bool no_stratify = false;
  std::size_t min_tokens = 5;
  std::size_t footer_min_occurrences = 10;
  std::string emoji = "keep";
  bool keep_urls = false;
  bool keep_handles = false;
  bool keep_ibans = false;
  bool keep_footers = false;
  bool keep_duplicates = false;
};

int cmd_prepare(const PrepareOptions& o) {
  if (o.inputs.empty()) throw ConfigError("prepare needs at least one --input");
  const auto format = corpus::parse_input_format(o.format);
  std::vector<corpus::Record> records;
  for (const auto& path : o.inputs) {
    auto part = corpus::ingest(path, format);
    records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.message.id).second) throw DuplicateIdError("duplicate message id across inputs: " + r.message.id);
  }

  corpus::PreprocessRules rules;
  rules.remove_urls = !o.keep_urls;
  rules.remove_handles = !o.keep_handles;
  rules.remove_ibans = !o.keep_ibans;
  rules.remove_footers = !o.keep_footers;
  rules.emoji = corpus::parse_emoji_policy(o.emoji);
  if (rules.remove_footers) {
    std::vector<corpus::Message> messages;
    messages.reserve(records.size());
    for (const auto& r : records) messages.push_back(r.message);
    rules.footers = corpus::detect_footers(messages, o.footer_min_occurrences);
  }

  std::size_t unannotated = 0;
  std::size_t excluded = 0;
  std::vector<corpus::LabeledExample> examples;
  for (const auto& r : records) {
    if (!r.annotation) {
      ++unannotated;
      continue;
    }
    const auto decision = corpus::derive_label(*r.annotation);
    if (decision == corpus::LabelDecision::excluded) {
      ++excluded;
      continue;
    }
    examples.push_back(corpus::LabeledExample{corpus::preprocess(r.message, rules),
                                              decision == corpus::LabelDecision::positive ? corpus::Label::positive
                                                                                          : corpus::Label::negative,
                                              r.annotation});
  }
  const std::size_t labeled = examples.size();
  examples = corpus::filter_short(examples, o.min_tokens);
  const std::size_t after_filter = examples.size();
  if (!o.keep_duplicates) examples = corpus::dedupe(examples);

  const auto r = parse_ratios(o.ratios);
  const auto split = corpus::split(examples, corpus::SplitRatios{r[0], r[1], r[2]}, o.seed, !o.no_stratify);

  json footers = json::object();
  for (const auto& [channel, set] : rules.footers.by_channel) footers[channel] = set;
  json config{{"inputs", o.inputs},
              {"format", o.format},
              {"preprocess",
               {{"remove_urls", rules.remove_urls},
                {"remove_handles", rules.remove_handles},
                {"remove_ibans", rules.remove_ibans},
                {"remove_footers", rules.remove_footers},
                {"emoji", o.emoji},
                {"footer_min_occurrences", o.footer_min_occurrences},
                {"footers", footers}}},
              {"min_tokens", o.min_tokens},
              {"dedupe", !o.keep_duplicates}};
  json funnel{{"ingested", records.size()},
              {"unannotated", unannotated},
              {"excluded_stance_or_reference", excluded},
              {"labeled", labeled},
              {"dropped_short", labeled - after_filter},
              {"dropped_duplicates", after_filter - examples.size()},
              {"kept", examples.size()}};
  corpus::write_split(split, o.out, json{{"config", config}, {"funnel", funnel}});
  std::cout << "prepared " << examples.size() << " examples: train " << split.train.size() << ", validation "
            << split.validation.size() << ", test " << split.test.size() << " -> " << o.out << "\n";
  return kExitOk;
}

// --- sample ------------------------------------------------------------------------------------

struct SampleOptions {
  std::string data = "data";
  std::size_t n_sets = 5;
  std::uint64_t seed = 42;
  std::string out;
};

int cmd_sample(const SampleOptions& o) {
  const auto pool = corpus::read_examples(fs::path(o.data) / "train.jsonl");
  const auto sets = sampler::build_few_shot_sets(pool, o.n_sets, o.seed);
  const auto out = o.out.empty() ? (fs::path(o.data) / "fewshot.json").string() : o.out;
  write_file(out, dump(sampler::manifest(sets, o.seed)));
  std::cout << "sampled " << sets.size() << " few-shot sets -> " << out << "\n";
  return kExitOk;
}

// --- run -------------------------------------------------------------------------------------

struct RunOptions {
  std::string task = "zero-shot-binary";
  std::string definition;  // custom for zero-shot, none for few-shot
  std::string model = "gpt4";
  std::string data = "data";
  std::string split = "test";
  std::string fixture;
  std::string fewshot;
  std::size_t set_index = 0;
  std::string run_id;
  std::string out = "runs";
  std::size_t max_in_flight = 4;
  int max_attempts = 5;
  std::size_t limit = 0;
};

std::string default_run_id(const RunOptions& o) {
  std::string id = o.task + "-" + o.definition + "-" + o.model + "-" + o.split;
  if (prompt::parse_task(o.task) == prompt::Task::few_shot_binary) id += "-set" + std::to_string(o.set_index);
  return id;
}

json run_config_json(const RunOptions& o, const prompt::PromptSpec& spec, const gateway::ModelProfile& profile) {
  return json{{"task", o.task},
              {"definition", o.definition},
              {"model", o.model},
              {"data", o.data},
              {"split", o.split},
              {"fixture", o.fixture.empty() ? json(nullptr) : json(o.fixture)},
              {"fewshot", o.fewshot.empty() ? json(nullptr) : json(o.fewshot)},
              {"set_index", o.set_index},
              {"max_in_flight", o.max_in_flight},
              {"max_attempts", o.max_attempts},
              {"limit", o.limit},
              {"prompt_spec", prompt::to_json(spec)},
              {"profile", gateway::to_json(profile)},
              {"template_version", std::string(prompt::kTemplateVersion)}};
}

RunOptions run_options_from_json(const json& c) {
  RunOptions o;
  o.task = c.at("task").get<std::string>();
  o.definition = c.at("definition").get<std::string>();
  o.model = c.at("model").get<std::string>();
  o.data = c.at("data").get<std::string>();
  o.split = c.at("split").get<std::string>();
  if (!c.at("fixture").is_null()) o.fixture = c["fixture"].get<std::string>();
  if (!c.at("fewshot").is_null()) o.fewshot = c["fewshot"].get<std::string>();
  o.set_index = c.at("set_index").get<std::size_t>();
  o.max_in_flight = c.value("max_in_flight", std::size_t{4});
  o.max_attempts = c.value("max_attempts", 5);
  o.limit = c.value("limit", std::size_t{0});
  return o;
}

fs::path split_file(const std::string& data, const std::string& split) {
  if (split != "train" && split != "validation" && split != "test") {
    throw ConfigError("--split must be train, validation or test, not '" + split + "'");
  }
  return fs::path(data) / (split + ".jsonl");
}

int execute_run(RunOptions o) {
  prompt::PromptSpec spec;
  spec.task = prompt::parse_task(o.task);
  if (o.definition.empty()) o.definition = spec.task == prompt::Task::few_shot_binary ? "none" : "custom";
  spec.definition = prompt::DefinitionVariant::of(prompt::parse_definition_kind(o.definition));
  auto profile = gateway::preset_profile(o.model);
  profile.max_in_flight = o.max_in_flight;
  spec.dialect = profile.dialect;
  spec.validate();
  if (o.run_id.empty()) o.run_id = default_run_id(o);

  auto examples = corpus::read_examples(split_file(o.data, o.split));
  if (o.limit > 0 && examples.size() > o.limit) examples.resize(o.limit);

  std::optional<sampler::FewShotSet> shots;
  if (spec.task == prompt::Task::few_shot_binary) {
    if (o.fewshot.empty()) throw ConfigError("few-shot runs need --fewshot");
    const auto sets = sampler::read_manifest(o.fewshot);
    if (o.set_index >= sets.size()) {
      throw ConfigError("--set-index " + std::to_string(o.set_index) + " out of range; manifest has " +
                        std::to_string(sets.size()) + " sets");
    }
    shots = sets[o.set_index];
  }

  std::vector<prompt::RenderedPrompt> prompts;
  prompts.reserve(examples.size());
  for (const auto& e : examples) prompts.push_back(prompt::render(e.message, spec, shots ? &*shots : nullptr));

  const fs::path dir = fs::path(o.out) / o.run_id;
  fs::create_directories(dir);
  const auto ledger_path = dir / "ledger.jsonl";
  // Reading the fixture before truncating allows replaying a run in place.
  std::optional<gateway::Fixture> fixture;
  if (!o.fixture.empty()) fixture = gateway::load_fixture(o.fixture);
  fs::remove(ledger_path);
  gateway::RunLedger ledger(o.run_id, profile, spec, ledger_path);

  std::vector<gateway::ModelResponse> responses;
  if (fixture) {
    responses = gateway::replay(*fixture, prompts);
    for (std::size_t i = 0; i < responses.size(); ++i) {
      ledger.append(gateway::LedgerEntry{gateway::prompt_digest(prompts[i]), responses[i]});
    }
  } else {
    gateway::HttpTransport transport;
    gateway::RetryPolicy retry;
    retry.max_attempts = o.max_attempts;
    responses = gateway::classify_batch(prompts, profile, ledger, transport, retry);
  }

  std::vector<parsers::Prediction> predictions;
  predictions.reserve(responses.size());
  std::map<std::string, std::size_t> status_counts;
  std::size_t transport_failures = 0;
  for (const auto& r : responses) {
    if (r.error) {
      ++transport_failures;
      parsers::Prediction p;
      p.message_id = r.message_id;
      p.status = parsers::ParseStatus::failed;
      predictions.push_back(std::move(p));
    } else {
      predictions.push_back(parsers::make_prediction(r.message_id, r.raw_output, spec.task));
    }
    ++status_counts[std::string(parsers::to_string(predictions.back().status))];
  }
  write_file(dir / "predictions.jsonl", parsers::to_jsonl(predictions));

  const auto usage = ledger.total_usage();
  json manifest{{"run_id", o.run_id},
                {"config", run_config_json(o, spec, profile)},
                {"n_prompts", prompts.size()},
                {"parse_status", status_counts},
                {"transport_failures", transport_failures},
                {"token_usage", {{"prompt", usage.prompt}, {"completion", usage.completion}}},
                {"artifacts", {{"ledger", "ledger.jsonl"}, {"predictions", "predictions.jsonl"}}}};
  write_file(dir / "manifest.json", dump(manifest));
  std::cout << "run " << o.run_id << ": " << prompts.size() << " prompts";
  for (const auto& [status, n] : status_counts) std::cout << ", " << status << " " << n;
  std::cout << " -> " << dir.string() << "\n";
  return kExitOk;
}

// --- run directories -----------------------------------------------------------------------------

struct LoadedRun {
  fs::path dir;
  json manifest;
  RunOptions options;
  std::vector<parsers::Prediction> predictions;
  std::vector<corpus::LabeledExample> gold;
};

LoadedRun load_run(const std::string& dir) {
  LoadedRun r;
  r.dir = dir;
  const auto manifest_path = r.dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError("not a run directory (no manifest.json): " + dir);
  r.manifest = json::parse(read_file(manifest_path));
  r.options = run_options_from_json(r.manifest.at("config"));
  r.predictions = parsers::read_predictions(r.dir / "predictions.jsonl");
  r.gold = corpus::read_examples(split_file(r.options.data, r.options.split));
  if (r.options.limit > 0 && r.gold.size() > r.options.limit) r.gold.resize(r.options.limit);
  return r;
}

std::optional<double> resolve_threshold(const std::string& file, std::optional<double> value) {
  if (!file.empty() && value) throw ConfigError("give either a threshold value or a threshold file, not both");
  if (value) return value;
  if (file.empty()) return std::nullopt;
  return json::parse(read_file(file)).at("threshold").get<double>();
}

// Threshold from the explicit options, or else the run's own calibration file when present.
std::optional<double> threshold_for(const LoadedRun& run, const std::string& file, std::optional<double> value) {
  if (auto t = resolve_threshold(file, value)) return t;
  const auto own = run.dir / "threshold.json";
  if (fs::exists(own)) return json::parse(read_file(own)).at("threshold").get<double>();
  return std::nullopt;
}

// --- calibrate / evaluate ------------------------------------------------------------------------

struct CalibrateOptions {
  std::string run;
  std::string objective = "f1_positive";
  std::string out;
};

int cmd_calibrate(const CalibrateOptions& o) {
  const auto run = load_run(o.run);
  const auto scored = eval::scored_gold(run.predictions, run.gold);
  const auto result = eval::optimize_threshold(scored, eval::parse_objective(o.objective));
  auto j = eval::to_json(result);
  j["run_id"] = run.manifest.at("run_id");
  j["split"] = run.options.split;
  j["n_scored"] = scored.size();
  const auto out = o.out.empty() ? (run.dir / "threshold.json").string() : o.out;
  write_file(out, dump(j));
  std::cout << "threshold " << format_fixed(result.threshold, 4) << " (" << o.objective << " "
            << format_fixed(result.objective_value, 4) << ") -> " << out << "\n";
  return kExitOk;
}

struct EvaluateOptions {
  std::string run;
  std::string threshold_file;
  std::optional<double> threshold;
  std::string failed = "exclude";
  std::string out;
};

eval::FailedPolicy parse_failed_policy(const std::string& s) {
  if (s == "exclude") return eval::FailedPolicy::exclude;
  if (s == "as-negative") return eval::FailedPolicy::as_negative;
  throw ConfigError("--failed must be exclude or as-negative, not '" + s + "'");
}

int cmd_evaluate(const EvaluateOptions& o) {
  const auto run = load_run(o.run);
  const auto threshold = threshold_for(run, o.threshold_file, o.threshold);
  auto report = eval::evaluate(run.predictions, run.gold, threshold, parse_failed_policy(o.failed));
  report.metadata["run_id"] = run.manifest.at("run_id").get<std::string>();
  report.metadata["split"] = run.options.split;
  report.metadata["failed_policy"] = o.failed;
  if (threshold) report.metadata["threshold"] = format_fixed(*threshold, 6);
  const auto out = o.out.empty() ? (run.dir / "report.json").string() : o.out;
  write_file(out, dump(eval::to_json(report)));
  std::cout << eval::render_table({{report.metadata["run_id"], report}});
  return kExitOk;
}

// --- compare ----------------------------------------------------------------------------------

struct CompareOptions {
  std::vector<std::string> runs;
  std::vector<std::string> group_a;
  std::vector<std::string> group_b;
  std::string metric = "f1_macro";
  bool paired = false;
  double alpha = stats::kDefaultAlpha;
  std::string out;
};

std::vector<eval::LabeledId> labels_of(const LoadedRun& run) {
  const auto scored = eval::align(run.predictions, run.gold, threshold_for(run, "", std::nullopt));
  return scored.pred;
}

int compare_pair(const CompareOptions& o) {
  const auto a = load_run(o.runs[0]);
  const auto b = load_run(o.runs[1]);
  if (a.options.data != b.options.data || a.options.split != b.options.split) {
    throw AlignmentError("runs were made on different splits and cannot be paired");
  }
  const auto pred_a = labels_of(a);
  const auto pred_b = labels_of(b);

  // Pair only items that both runs resolved to a label.
  std::unordered_map<std::string, corpus::Label> in_b;
  for (const auto& p : pred_b) in_b.emplace(p.id, p.label);
  std::unordered_map<std::string, corpus::Label> gold_by_id;
  for (const auto& g : a.gold) gold_by_id.emplace(g.message.id, g.label);
  std::vector<eval::LabeledId> gold, pa, pb;
  for (const auto& p : pred_a) {
    auto it = in_b.find(p.id);
    if (it == in_b.end()) continue;
    gold.push_back({p.id, gold_by_id.at(p.id)});
    pa.push_back(p);
    pb.push_back({p.id, it->second});
  }
  const auto outcomes = stats::paired_outcomes(gold, pa, pb);
  const auto test = stats::mcnemar(outcomes, o.alpha);
  const auto dis = stats::disagreement(pa, pb);
  json j{{"run_a", a.manifest.at("run_id")},
         {"run_b", b.manifest.at("run_id")},
         {"split", a.options.split},
         {"n_paired", gold.size()},
         {"n_unpaired", a.gold.size() - gold.size()},
         {"outcomes",
          {{"both_wrong", outcomes.n00},
           {"only_b_correct", outcomes.n01},
           {"only_a_correct", outcomes.n10},
           {"both_correct", outcomes.n11}}},
         {"mcnemar", stats::to_json(test)},
         {"disagreement", {{"rate", dis.rate}, {"n", dis.ids.size()}, {"ids", dis.ids}}}};
  emit(dump(j), o.out);
  return kExitOk;
}

int compare_groups(const CompareOptions& o) {
  auto metric_values = [&](const std::vector<std::string>& dirs) {
    std::vector<double> values;
    std::vector<eval::EvalReport> reports;
    for (const auto& d : dirs) {
      const auto run = load_run(d);
      auto report = eval::evaluate(run.predictions, run.gold, threshold_for(run, "", std::nullopt));
      const auto flat = report.flat();
      const auto it = flat.find(o.metric);
      if (it == flat.end()) throw ConfigError("unknown metric '" + o.metric + "'");
      values.push_back(it->second);
      reports.push_back(std::move(report));
    }
    return std::make_pair(values, reports);
  };
  const auto [va, ra] = metric_values(o.group_a);
  const auto [vb, rb] = metric_values(o.group_b);
  const auto test = o.paired ? stats::paired_t(va, vb, o.alpha) : stats::welch_t(va, vb, o.alpha);
  json j{{"metric", o.metric},
         {"group_a", {{"runs", o.group_a}, {"values", va}, {"aggregate", stats::to_json(stats::aggregate_runs(ra))}}},
         {"group_b", {{"runs", o.group_b}, {"values", vb}, {"aggregate", stats::to_json(stats::aggregate_runs(rb))}}},
         {"test", stats::to_json(test)}};
  emit(dump(j), o.out);
  return kExitOk;
}

int cmd_compare(const CompareOptions& o) {
  const bool pair = !o.runs.empty();
  const bool groups = !o.group_a.empty() || !o.group_b.empty();
  if (pair == groups) throw ConfigError("compare takes either two run directories or --group-a/--group-b");
  if (pair) {
    if (o.runs.size() != 2) throw ConfigError("compare takes exactly two run directories");
    return compare_pair(o);
  }
  return compare_groups(o);
}

// --- analyze ---------------------------------------------------------------------------------

struct AnalyzeOptions {
  std::string run;
  std::string threshold_file;
  std::optional<double> threshold;
  std::size_t min_messages = analysis::kDefaultMinMessages;
  std::string format = "json";
  std::string out;
};

int cmd_analyze(const AnalyzeOptions& o) {
  const auto run = load_run(o.run);
  const auto threshold = threshold_for(run, o.threshold_file, o.threshold);
  const auto frag = analysis::breakdown_by_fragmentation(run.predictions, run.gold, threshold);
  std::vector<corpus::Message> messages;
  messages.reserve(run.gold.size());
  for (const auto& g : run.gold) messages.push_back(g.message);
  const auto channels = analysis::channel_report(run.predictions, messages, o.min_messages, threshold);

  std::string text;
  if (o.format == "json") {
    json j{{"run_id", run.manifest.at("run_id")},
           {"threshold", threshold ? json(*threshold) : json(nullptr)},
           {"fragmentation", analysis::to_json(frag)},
           {"channels", analysis::to_json(channels)}};
    text = dump(j);
  } else if (o.format == "table") {
    text = analysis::render_table(frag) + "\n" + analysis::render_table(channels);
  } else if (o.format == "csv") {
    text = analysis::to_csv(channels);
  } else {
    throw ConfigError("--format must be json, table or csv, not '" + o.format + "'");
  }
  emit(text, o.out);
  return kExitOk;
}

// --- prompts dump / replay -------------------------------------------------------------------------

int cmd_prompts_dump(const std::string& out) {
  const auto templates = prompt::dump_templates();
  if (out.empty()) {
    for (const auto& t : templates) std::cout << "=== " << t.name << " ===\n" << t.text << "\n\n";
  } else {
    for (const auto& t : templates) write_file(fs::path(out) / (t.name + ".txt"), t.text);
    std::cout << "wrote " << templates.size() << " templates -> " << out << "\n";
  }
  return kExitOk;
}

struct ReplayOptions {
  std::string manifest;
  std::string fixture;
  std::string out;
  std::string run_id;
};

int cmd_replay(const ReplayOptions& o) {
  const fs::path manifest_path = o.manifest;
  const auto manifest = json::parse(read_file(manifest_path));
  auto run = run_options_from_json(manifest.at("config"));
  run.fixture = o.fixture.empty() ? (manifest_path.parent_path() / "ledger.jsonl").string() : o.fixture;
  run.run_id = o.run_id.empty() ? manifest.at("run_id").get<std::string>() : o.run_id;
  run.out = o.out.empty() ? manifest_path.parent_path().parent_path().string() : o.out;
  return execute_run(run);
}

// Values from a --config file become option defaults, so explicit flags win.
void apply_config(CLI::App& sub, const config::Settings& settings) {
  std::set<std::string> known;
  for (auto* opt : sub.get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "config" || name == "help") continue;
    known.insert(name);
    for (const auto& key : {name, sub.get_name() + "." + name}) {
      if (auto v = settings.get(key)) opt->default_val(*v);
    }
  }
  for (const auto& [key, _] : settings.values()) {
    const auto dot = key.find('.');
    const auto section = dot == std::string::npos ? std::string() : key.substr(0, dot);
    const auto name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (!section.empty() && section != sub.get_name()) continue;
    if (!known.contains(name)) throw ConfigError("config key '" + key + "' is not an option of '" + sub.get_name() + "'");
  }
}

std::optional<std::string> config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation harness for conspiracy-theory classification with language models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ctharness 1.0");

  PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "ingest, preprocess, label, filter and split a corpus");
  prepare->add_option("--input", prep.inputs, "annotated corpus file (repeatable)");
  prepare->add_option("--format", prep.format, "jsonl or csv")->capture_default_str();
  prepare->add_option("--out", prep.out, "output directory for split files")->capture_default_str();
  prepare->add_option("--seed", prep.seed, "split seed")->capture_default_str();
  prepare->add_option("--ratios", prep.ratios, "train,validation,test")->capture_default_str();
  prepare->add_flag("--no-stratify", prep.no_stratify, "split without preserving the class ratio");
  prepare->add_option("--min-tokens", prep.min_tokens, "drop texts with fewer tokens")->capture_default_str();
  prepare->add_option("--footer-min-occurrences", prep.footer_min_occurrences,
                      "repeats needed before a trailing block counts as a channel footer")
      ->capture_default_str();
  prepare->add_option("--emoji", prep.emoji, "keep or strip")->capture_default_str();
  prepare->add_flag("--keep-urls", prep.keep_urls);
  prepare->add_flag("--keep-handles", prep.keep_handles);
  prepare->add_flag("--keep-ibans", prep.keep_ibans);
  prepare->add_flag("--keep-footers", prep.keep_footers);
  prepare->add_flag("--keep-duplicates", prep.keep_duplicates);

  SampleOptions samp;
  auto* sample = app.add_subcommand("sample", "draw few-shot example sets from the training split");
  sample->add_option("--data", samp.data, "prepared data directory")->capture_default_str();
  sample->add_option("--n-sets", samp.n_sets, "number of sets")->capture_default_str();
  sample->add_option("--seed", samp.seed, "sampling seed")->capture_default_str();
  sample->add_option("--out", samp.out, "manifest path (default <data>/fewshot.json)");

  RunOptions runo;
  auto* run = app.add_subcommand("run", "classify one split with one prompt and model configuration");
  run->add_option("--task", runo.task, "zero-shot-binary, zero-shot-probabilistic or few-shot-binary")
      ->capture_default_str();
  run->add_option("--definition", runo.definition, "custom, lorem-ipsum or none (default custom; none for few-shot)");
  run->add_option("--model", runo.model, "gpt35, gpt4 or llama2")->capture_default_str();
  run->add_option("--data", runo.data, "prepared data directory")->capture_default_str();
  run->add_option("--split", runo.split, "train, validation or test")->capture_default_str();
  run->add_option("--fixture", runo.fixture, "replay recorded responses instead of calling the model");
  run->add_option("--fewshot", runo.fewshot, "few-shot manifest from `sample`");
  run->add_option("--set-index", runo.set_index, "few-shot set to use")->capture_default_str();
  run->add_option("--run-id", runo.run_id, "run directory name (default derived from the configuration)");
  run->add_option("--out", runo.out, "parent directory for runs")->capture_default_str();
  run->add_option("--max-in-flight", runo.max_in_flight, "concurrent requests")->capture_default_str();
  run->add_option("--max-attempts", runo.max_attempts, "attempts per request")->capture_default_str();
  run->add_option("--limit", runo.limit, "classify only the first N items (0 = all)")->capture_default_str();

  CalibrateOptions cal;
  auto* calibrate = app.add_subcommand("calibrate", "choose a score threshold on a scored run");
  calibrate->add_option("--run", cal.run, "run directory")->required();
  calibrate->add_option("--objective", cal.objective, "f1_positive, macro_f1 or youden")->capture_default_str();
  calibrate->add_option("--out", cal.out, "threshold file (default <run>/threshold.json)");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "score a run against its gold labels");
  evaluate->add_option("--run", ev.run, "run directory")->required();
  auto* tf = evaluate->add_option("--threshold-file", ev.threshold_file, "threshold from `calibrate`");
  evaluate->add_option("--threshold", ev.threshold, "explicit score threshold")->excludes(tf);
  evaluate->add_option("--failed", ev.failed, "exclude or as-negative")->capture_default_str();
  evaluate->add_option("--out", ev.out, "report path (default <run>/report.json)");

  CompareOptions cmp;
  auto* compare = app.add_subcommand("compare", "significance and disagreement between runs");
  compare->add_option("runs", cmp.runs, "two run directories");
  compare->add_option("--group-a", cmp.group_a, "repeated runs of configuration A");
  compare->add_option("--group-b", cmp.group_b, "repeated runs of configuration B");
  compare->add_option("--metric", cmp.metric, "metric compared across groups")->capture_default_str();
  compare->add_flag("--paired", cmp.paired, "paired t test instead of Welch");
  compare->add_option("--alpha", cmp.alpha, "significance level")->capture_default_str();
  compare->add_option("--out", cmp.out, "output path (default stdout)");

  AnalyzeOptions an;
  auto* analyze = app.add_subcommand("analyze", "fragmentation and per-channel breakdowns");
  analyze->add_option("--run", an.run, "run directory")->required();
  auto* atf = analyze->add_option("--threshold-file", an.threshold_file, "threshold from `calibrate`");
  analyze->add_option("--threshold", an.threshold, "explicit score threshold")->excludes(atf);
  analyze->add_option("--min-messages", an.min_messages, "minimum messages per listed channel")
      ->capture_default_str();
  analyze->add_option("--format", an.format, "json, table or csv")->capture_default_str();
  analyze->add_option("--out", an.out, "output path (default stdout)");

  std::string prompts_out;
  auto* prompts = app.add_subcommand("prompts", "inspect prompt templates");
  prompts->require_subcommand(1);
  auto* prompts_dump = prompts->add_subcommand("dump", "print every template");
  prompts_dump->add_option("--out", prompts_out, "write one file per template into this directory");

  ReplayOptions rep;
  auto* replay = app.add_subcommand("replay", "re-execute a run from its manifest using recorded responses");
  replay->add_option("--manifest", rep.manifest, "run manifest.json")->required();
  replay->add_option("--fixture", rep.fixture, "recorded responses (default the run's ledger)");
  replay->add_option("--out", rep.out, "parent directory for the replayed run");
  replay->add_option("--run-id", rep.run_id, "name for the replayed run");

  std::string config_file;
  for (auto* sub : {prepare, sample, run, calibrate, evaluate, compare, analyze}) {
    sub->add_option("--config", config_file, "key = value settings file; flags override it");
  }

  try {
    if (auto path = config_path(argc, argv)) {
      const auto settings = config::Settings::load(*path);
      for (auto* sub : {prepare, sample, run, calibrate, evaluate, compare, analyze}) {
        for (int i = 1; i < argc; ++i) {
          if (argv[i] == sub->get_name()) {
            apply_config(*sub, settings);
            break;
          }
        }
      }
    }
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }

  try {
    if (*prepare) return cmd_prepare(prep);
    if (*sample) return cmd_sample(samp);
    if (*run) return execute_run(runo);
    if (*calibrate) return cmd_calibrate(cal);
    if (*evaluate) return cmd_evaluate(ev);
    if (*compare) return cmd_compare(cmp);
    if (*analyze) return cmd_analyze(an);
    if (*prompts_dump) return cmd_prompts_dump(prompts_out);
    if (*replay) return cmd_replay(rep);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ReplayMissError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& d : e.digests()) std::cerr << "  missing " << d << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
