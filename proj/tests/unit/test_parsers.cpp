#include <doctest.h>

#include <json.hpp>

#include "ctharness/parsers.hpp"
#include "ctharness/util.hpp"
#include "test_support.hpp"

using namespace ctharness;
using namespace ctharness::parsers;
using corpus::Label;
using nlohmann::json;

namespace {

ParseResult parse_with(const std::string& parser, const std::string& raw) {
  if (parser == "binary") return parse_binary(raw);
  if (parser == "probability") return parse_probability(raw);
  if (parser == "few_shot") return parse_few_shot_label(raw);
  FAIL("unknown parser " << parser);
  return {};
}

bool is_positive(const ParseResult& r) {
  return r.verdict && is_label(*r.verdict) && std::get<Label>(*r.verdict) == Label::positive;
}
bool is_negative(const ParseResult& r) {
  return r.verdict && is_label(*r.verdict) && std::get<Label>(*r.verdict) == Label::negative;
}

}  // namespace

TEST_CASE("noisy output corpus agrees with documented verdicts") {
  const auto lines = split_lines(read_file(cth_test::fixture("parser_corpus.jsonl")));
  std::size_t n = 0;
  for (const auto& line : lines) {
    if (trim(line).empty()) continue;
    const auto row = json::parse(line);
    const auto parser = row["parser"].get<std::string>();
    const auto raw = row["raw"].get<std::string>();
    CAPTURE(parser);
    CAPTURE(raw);
    const auto r = parse_with(parser, raw);
    CHECK(to_string(r.status) == row["expected_status"].get<std::string>());
    const auto& expected = row["expected_verdict"];
    if (expected.is_null()) {
      CHECK_FALSE(r.verdict.has_value());
    } else if (expected.is_string()) {
      REQUIRE(r.verdict.has_value());
      REQUIRE(is_label(*r.verdict));
      CHECK(corpus::to_string(std::get<Label>(*r.verdict)) == expected.get<std::string>());
    } else {
      REQUIRE(r.verdict.has_value());
      REQUIRE(is_score(*r.verdict));
      CHECK(std::get<double>(*r.verdict) == expected.get<double>());
    }
    ++n;
  }
  CHECK(n >= 50);
}

TEST_CASE("binary grammar examples") {
  CHECK(parse_binary("Yes").status == ParseStatus::clean);
  CHECK(is_positive(parse_binary("Yes")));
  const auto r = parse_binary(" b) No\n");
  CHECK(is_negative(r));
  CHECK(r.status == ParseStatus::recovered);
  CHECK(parse_binary("The message could be either.").status == ParseStatus::failed);
}

TEST_CASE("binary parse is stable under decoration") {
  const std::vector<std::string> accepted{"yes", "No", "a) Yes", "b) no", "label: yes", "Answer: No", "1", "0", "Ja"};
  const std::vector<std::pair<std::string, std::string>> wraps{
      {" ", " "}, {"\"", "\""}, {"'", "'"}, {"", "."}, {"\n", "\n"}, {"\t\"", ".\"\n"}, {"**", "**"}};
  for (const auto& a : accepted) {
    const auto base = parse_binary(a);
    REQUIRE(base.verdict.has_value());
    for (const auto& [pre, post] : wraps) {
      const auto r = parse_binary(pre + a + post);
      CAPTURE(pre + a + post);
      CHECK(r.verdict == base.verdict);
      CHECK(r.status == ParseStatus::recovered);
    }
  }
}

TEST_CASE("parsers are total over arbitrary bytes") {
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng.below(24), ' ');
    for (auto& c : s) c = static_cast<char>(rng.below(256));
    for (const auto& r : {parse_binary(s), parse_probability(s), parse_few_shot_label(s)}) {
      CHECK(r.verdict.has_value() == (r.status != ParseStatus::failed));
      if (r.verdict && is_score(*r.verdict)) {
        const double v = std::get<double>(*r.verdict);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("probability grammar") {
  auto r = parse_probability("0.85");
  CHECK(r.status == ParseStatus::clean);
  CHECK(std::get<double>(*r.verdict) == 0.85);
  r = parse_probability("The score is: 0.7");
  CHECK(r.status == ParseStatus::recovered);
  CHECK(std::get<double>(*r.verdict) == 0.7);
  CHECK(parse_probability("maybe 1.5").status == ParseStatus::failed);
}

TEST_CASE("task dispatch and prediction records") {
  auto p = make_prediction("m1", "Score: 0.4", prompt::Task::zero_shot_probabilistic);
  CHECK(p.status == ParseStatus::recovered);
  CHECK(std::get<double>(*p.verdict) == 0.4);
  p = make_prediction("m2", "label: No", prompt::Task::few_shot_binary);
  CHECK(is_negative(ParseResult{p.verdict, p.status}));
  p = make_prediction("m3", "???", prompt::Task::zero_shot_binary);
  CHECK(p.status == ParseStatus::failed);
  CHECK(p.raw_output == "???");
}

TEST_CASE("prediction JSON round trip") {
  const std::vector<Prediction> preds{
      make_prediction("a", "Yes", prompt::Task::zero_shot_binary),
      make_prediction("b", " 0.25\n", prompt::Task::zero_shot_probabilistic),
      make_prediction("c", "", prompt::Task::zero_shot_binary),
  };
  const auto dir = cth_test::scratch("parsers");
  write_file(dir / "p.jsonl", to_jsonl(preds));
  const auto back = read_predictions(dir / "p.jsonl");
  REQUIRE(back.size() == preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(back[i].message_id == preds[i].message_id);
    CHECK(back[i].verdict == preds[i].verdict);
    CHECK(back[i].raw_output == preds[i].raw_output);
    CHECK(back[i].status == preds[i].status);
  }
}
