#include <doctest.h>

#include <json.hpp>

#include "ctharness/util.hpp"
#include "test_support.hpp"

using namespace ctharness;
using cth_test::fixture;
using cth_test::run_cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kReplay = "'" + fixture("replay_fixture.jsonl").string() + "'";

fs::path prepared(const std::string& name) {
  const auto dir = cth_test::scratch(name);
  REQUIRE(run_cli("prepare --input '" + fixture("synthetic_corpus.jsonl").string() + "' --out data", dir) == 0);
  REQUIRE(run_cli("sample --data data --n-sets 3", dir) == 0);
  return dir;
}

std::string stderr_of(const fs::path& dir) { return read_file(dir / "stderr.txt"); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const auto dir = cth_test::scratch("cli-usage");
  CHECK(run_cli("frobnicate", dir) == 2);
  CHECK(run_cli("run --task zero-shot-binary --bogus", dir) == 2);
  CHECK(run_cli("run --task zero-shot-binary --model gpt9 --data data --fixture x", dir) == 2);
  write_file(dir / "bad.toml", "no-such-key = 1\n");
  CHECK(run_cli("prepare --config bad.toml --input x", dir) == 2);
  CHECK(run_cli("--help", dir) == 0);
}

TEST_CASE("pipeline failures exit with 1") {
  const auto dir = prepared("cli-fail");
  CHECK(run_cli("run --task zero-shot-binary --data data --fixture missing.jsonl", dir) == 1);
  CHECK(run_cli("prepare --input nope.jsonl --out d2", dir) == 1);
  write_file(dir / "partial.jsonl", split_lines(read_file(fixture("replay_fixture.jsonl")))[0] + "\n");
  CHECK(run_cli("run --task zero-shot-binary --data data --fixture partial.jsonl", dir) == 1);
  CHECK(stderr_of(dir).find("digest") != std::string::npos);
  CHECK(run_cli("evaluate --run runs/absent", dir) == 1);
}

TEST_CASE("prepare writes splits and a funnel") {
  const auto dir = prepared("cli-prepare");
  for (const char* f : {"train.jsonl", "validation.jsonl", "test.jsonl", "manifest.json", "fewshot.json"}) {
    CHECK(fs::exists(dir / "data" / f));
  }
  const auto m = json::parse(read_file(dir / "data" / "manifest.json"));
  const auto dump = m.dump();
  CHECK(dump.find("\"kept\":51") != std::string::npos);
  CHECK(json::parse(read_file(dir / "data" / "fewshot.json"))["n_sets"] == 3);
}

TEST_CASE("replay run, calibrate, evaluate, compare, analyze") {
  const auto dir = prepared("cli-e2e");
  CHECK(run_cli("run --task zero-shot-probabilistic --split validation --data data --fixture " + kReplay, dir) == 0);
  CHECK(run_cli("run --task zero-shot-probabilistic --split test --data data --fixture " + kReplay, dir) == 0);
  const std::string val = "runs/zero-shot-probabilistic-custom-gpt4-validation";
  const std::string test = "runs/zero-shot-probabilistic-custom-gpt4-test";
  CHECK(run_cli("calibrate --run " + val, dir) == 0);
  const auto th = json::parse(read_file(dir / val / "threshold.json"));
  CHECK(th["threshold"].get<double>() >= 0.0);
  CHECK(run_cli("evaluate --run " + test + " --threshold-file " + val + "/threshold.json", dir) == 0);
  CHECK(read_file(dir / "stdout.txt").find("Accuracy") != std::string::npos);
  CHECK(fs::exists(dir / test / "report.json"));

  const auto manifest = json::parse(read_file(dir / test / "manifest.json"));
  CHECK(manifest["n_prompts"] == 5);
  CHECK(manifest["config"]["profile"]["model"] == "gpt-4-0613");

  CHECK(run_cli("run --task zero-shot-binary --data data --fixture " + kReplay, dir) == 0);
  CHECK(run_cli("run --task zero-shot-binary --definition lorem-ipsum --model gpt35 --data data --fixture " + kReplay,
                dir) == 0);
  CHECK(run_cli("compare runs/zero-shot-binary-custom-gpt4-test runs/zero-shot-binary-lorem-ipsum-gpt35-test --out cmp.json",
                dir) == 0);
  const auto cmp = json::parse(read_file(dir / "cmp.json"));
  CHECK(cmp["n_paired"].get<int>() + cmp["n_unpaired"].get<int>() == 5);
  CHECK(cmp.contains("mcnemar"));

  CHECK(run_cli("analyze --run runs/zero-shot-binary-custom-gpt4-test --min-messages 1 --format json --out an.json",
                dir) == 0);
  const auto an = json::parse(read_file(dir / "an.json"));
  CHECK(an.contains("channels"));

  CHECK(run_cli("run --task few-shot-binary --data data --fewshot data/fewshot.json --set-index 2 --fixture " + kReplay,
                dir) == 0);
  CHECK(fs::exists(dir / "runs" / "few-shot-binary-none-gpt4-test-set2" / "predictions.jsonl"));
  CHECK(run_cli("run --task zero-shot-binary --model llama2 --data data --fixture " + kReplay, dir) == 0);
}

TEST_CASE("replay verb reproduces predictions") {
  const auto dir = prepared("cli-replay");
  REQUIRE(run_cli("run --task zero-shot-binary --data data --fixture " + kReplay, dir) == 0);
  const std::string run = "runs/zero-shot-binary-custom-gpt4-test";
  CHECK(run_cli("replay --manifest " + run + "/manifest.json --out again", dir) == 0);
  CHECK(read_file(dir / "again" / "zero-shot-binary-custom-gpt4-test" / "predictions.jsonl") ==
        read_file(dir / run / "predictions.jsonl"));
}

TEST_CASE("config presets feed flags and flags win") {
  const auto dir = prepared("cli-config");
  write_file(dir / "preset.toml",
             "task = \"zero-shot-binary\"\ndefinition = none\nmodel = gpt35\ndata = data\nrun-id = from-config\n");
  REQUIRE(run_cli("run --config preset.toml --fixture " + kReplay, dir) == 0);
  const auto m = json::parse(read_file(dir / "runs" / "from-config" / "manifest.json"));
  CHECK(m["config"]["profile"]["model"] == "gpt-3.5-turbo-0613");
  CHECK(m["config"]["prompt_spec"]["definition"] == "none");
  REQUIRE(run_cli("run --config preset.toml --run-id flag-wins --fixture " + kReplay, dir) == 0);
  CHECK(fs::exists(dir / "runs" / "flag-wins" / "manifest.json"));
}

TEST_CASE("prompts dump") {
  const auto dir = cth_test::scratch("cli-prompts");
  CHECK(run_cli("prompts dump --out pd", dir) == 0);
  CHECK(read_file(dir / "pd" / "system.txt").find("data annotation expert") != std::string::npos);
}
