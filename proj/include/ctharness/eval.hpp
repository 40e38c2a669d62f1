#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctharness/corpus.hpp"
#include "ctharness/parsers.hpp"

namespace ctharness::eval {

using corpus::Label;

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// One scored item keyed by message id.
struct LabeledId {
  std::string id;
  Label label = Label::negative;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool degenerate = false;
};

struct EvalReport {
  ConfusionCounts counts;
  std::array<ClassMetrics, 2> per_class{};  // index 0 = negative, 1 = positive
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t unparsable = 0;
  std::map<std::string, std::string> metadata;

  const ClassMetrics& negative() const { return per_class[0]; }
  const ClassMetrics& positive() const { return per_class[1]; }

  // Flat metric map keyed like "precision_1", "f1_macro", "accuracy".
  std::map<std::string, double> flat() const;
};

struct CurvePoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

enum class Objective { f1_positive, macro_f1, youden };

struct ThresholdResult {
  double threshold = 0.0;
  double objective_value = 0.0;  // positive-class F1 for the default objective
  Objective objective = Objective::f1_positive;
  std::vector<CurvePoint> curve;  // strictly increasing thresholds
};

struct ScoredGold {
  double score = 0.0;
  Label gold = Label::negative;
};

ConfusionCounts confusion(std::span<const Label> gold, std::span<const Label> pred);
// Throws AlignmentError unless both lists carry the same ids in the same order.
ConfusionCounts confusion(std::span<const LabeledId> gold, std::span<const LabeledId> pred);

EvalReport metrics(const ConfusionCounts& c);

ThresholdResult optimize_threshold(std::span<const ScoredGold> scores, Objective objective = Objective::f1_positive);

std::vector<Label> binarize(std::span<const double> scores, double threshold);

double objective_value(const ConfusionCounts& c, Objective objective);

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view s);

// --- prediction handling -------------------------------------------------------------

enum class FailedPolicy { exclude, as_negative };

struct Scored {
  std::vector<LabeledId> gold;
  std::vector<LabeledId> pred;
  std::size_t unparsable = 0;
};

// Aligns predictions with gold examples by message id. Score verdicts need a
// threshold. Failed parses are dropped and tallied, or read as negative.
Scored align(const std::vector<parsers::Prediction>& predictions,
             const std::vector<corpus::LabeledExample>& gold, std::optional<double> threshold,
             FailedPolicy policy = FailedPolicy::exclude);

EvalReport evaluate(const std::vector<parsers::Prediction>& predictions,
                    const std::vector<corpus::LabeledExample>& gold, std::optional<double> threshold,
                    FailedPolicy policy = FailedPolicy::exclude);

// Scores paired with gold labels; failed and non-score predictions are skipped.
std::vector<ScoredGold> scored_gold(const std::vector<parsers::Prediction>& predictions,
                                    const std::vector<corpus::LabeledExample>& gold);

// --- rendering ------------------------------------------------------------------------

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const ThresholdResult& r);
// Metric rows (precision/recall/F1 per class, macro F1, accuracy), one column per report.
std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& columns);

}  // namespace ctharness::eval
