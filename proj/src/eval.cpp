#include "ctharness/eval.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::eval {

using nlohmann::json;

namespace {

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.support = tp + fn;
  m.precision = ratio(tp, tp + fp, m.degenerate);
  m.recall = ratio(tp, tp + fn, m.degenerate);
  // 2PR/(P+R) written over counts, so equal count ratios give bit-identical F1.
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn, m.degenerate);
  return m;
}

}  // namespace

ConfusionCounts confusion(std::span<const Label> gold, std::span<const Label> pred) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) + " labels, predictions have " +
                         std::to_string(pred.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool g = gold[i] == Label::positive;
    const bool p = pred[i] == Label::positive;
    if (g && p) ++c.tp;
    else if (!g && p) ++c.fp;
    else if (g && !p) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(std::span<const LabeledId> gold, std::span<const LabeledId> pred) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) + " items, predictions have " +
                         std::to_string(pred.size()));
  }
  std::vector<Label> g(gold.size());
  std::vector<Label> p(pred.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].id != pred[i].id) {
      throw AlignmentError("position " + std::to_string(i) + ": gold id '" + gold[i].id + "' vs prediction id '" +
                           pred[i].id + "'");
    }
    g[i] = gold[i].label;
    p[i] = pred[i].label;
  }
  return confusion(g, p);
}

EvalReport metrics(const ConfusionCounts& c) {
  EvalReport r;
  r.counts = c;
  r.per_class[1] = class_metrics(c.tp, c.fp, c.fn);
  r.per_class[0] = class_metrics(c.tn, c.fn, c.fp);
  r.macro_f1 = (r.per_class[0].f1 + r.per_class[1].f1) / 2.0;
  bool unused = false;
  r.accuracy = ratio(c.tp + c.tn, c.total(), unused);
  return r;
}

std::map<std::string, double> EvalReport::flat() const {
  return {{"precision_0", per_class[0].precision}, {"precision_1", per_class[1].precision},
          {"recall_0", per_class[0].recall},       {"recall_1", per_class[1].recall},
          {"f1_0", per_class[0].f1},               {"f1_1", per_class[1].f1},
          {"f1_macro", macro_f1},                  {"accuracy", accuracy}};
}

double objective_value(const ConfusionCounts& c, Objective objective) {
  const auto r = metrics(c);
  switch (objective) {
    case Objective::f1_positive: return r.positive().f1;
    case Objective::macro_f1: return r.macro_f1;
    case Objective::youden: return r.positive().recall + r.negative().recall - 1.0;
  }
  return 0.0;
}

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::f1_positive: return "f1_positive";
    case Objective::macro_f1: return "macro_f1";
    case Objective::youden: return "youden";
  }
  return "?";
}

Objective parse_objective(std::string_view s) {
  for (auto o : {Objective::f1_positive, Objective::macro_f1, Objective::youden}) {
    if (to_string(o) == s) return o;
  }
  throw ConfigError("unknown calibration objective '" + std::string(s) + "'");
}

ThresholdResult optimize_threshold(std::span<const ScoredGold> scores, Objective objective) {
  std::size_t positives = 0;
  for (const auto& s : scores) {
    if (!(s.score >= 0.0 && s.score <= 1.0)) throw RangeError("score outside [0, 1]");
    if (s.gold == Label::positive) ++positives;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw CalibrationError("threshold calibration needs at least one positive and one negative gold label");
  }

  std::vector<ScoredGold> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredGold& a, const ScoredGold& b) { return a.score > b.score; });

  // Sweep from the highest score down; after consuming every item with
  // score >= t the counts describe the rule "positive iff score >= t".
  std::vector<std::pair<double, ConfusionCounts>> by_threshold;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == t) {
      if (sorted[i].gold == Label::positive) ++tp;
      else ++fp;
      ++i;
    }
    by_threshold.emplace_back(t, ConfusionCounts{tp, fp, positives - tp, negatives - fp});
  }
  std::reverse(by_threshold.begin(), by_threshold.end());

  ThresholdResult result;
  result.objective = objective;
  bool have_best = false;
  for (const auto& [t, c] : by_threshold) {
    const auto r = metrics(c);
    result.curve.push_back(CurvePoint{t, r.positive().precision, r.positive().recall});
    const double value = objective_value(c, objective);
    // Ascending order with >= resolves ties toward the larger threshold.
    if (!have_best || value >= result.objective_value) {
      result.threshold = t;
      result.objective_value = value;
      have_best = true;
    }
  }
  return result;
}

std::vector<Label> binarize(std::span<const double> scores, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw RangeError("threshold outside [0, 1]");
  std::vector<Label> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s >= threshold ? Label::positive : Label::negative);
  return out;
}

Scored align(const std::vector<parsers::Prediction>& predictions, const std::vector<corpus::LabeledExample>& gold,
             std::optional<double> threshold, FailedPolicy policy) {
  std::unordered_map<std::string, const parsers::Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.message_id, &p).second) {
      throw AlignmentError("duplicate prediction for message '" + p.message_id + "'");
    }
  }
  std::vector<std::string> missing;
  Scored out;
  for (const auto& g : gold) {
    auto it = by_id.find(g.message.id);
    if (it == by_id.end()) {
      missing.push_back(g.message.id);
      continue;
    }
    const auto& p = *it->second;
    by_id.erase(it);
    Label label;
    if (!p.verdict) {
      if (policy == FailedPolicy::exclude) {
        ++out.unparsable;
        continue;
      }
      ++out.unparsable;
      label = Label::negative;
    } else if (const auto* l = std::get_if<Label>(&*p.verdict)) {
      label = *l;
    } else {
      if (!threshold) throw CalibrationError("probabilistic predictions need a threshold to be binarized");
      label = std::get<double>(*p.verdict) >= *threshold ? Label::positive : Label::negative;
    }
    out.gold.push_back({g.message.id, g.label});
    out.pred.push_back({p.message_id, label});
  }
  if (!missing.empty() || !by_id.empty()) {
    std::string msg = "predictions and gold examples cover different ids";
    if (!missing.empty()) msg += "; no prediction for '" + missing.front() + "'" + (missing.size() > 1 ? " and others" : "");
    if (!by_id.empty()) msg += "; prediction for unknown id '" + by_id.begin()->first + "'";
    throw AlignmentError(msg);
  }
  return out;
}

EvalReport evaluate(const std::vector<parsers::Prediction>& predictions,
                    const std::vector<corpus::LabeledExample>& gold, std::optional<double> threshold,
                    FailedPolicy policy) {
  const auto scored = align(predictions, gold, threshold, policy);
  auto report = metrics(confusion(std::span<const LabeledId>(scored.gold), std::span<const LabeledId>(scored.pred)));
  report.unparsable = scored.unparsable;
  return report;
}

std::vector<ScoredGold> scored_gold(const std::vector<parsers::Prediction>& predictions,
                                    const std::vector<corpus::LabeledExample>& gold) {
  std::unordered_map<std::string, Label> gold_by_id;
  for (const auto& g : gold) gold_by_id.emplace(g.message.id, g.label);
  std::vector<ScoredGold> out;
  for (const auto& p : predictions) {
    if (!p.verdict || !parsers::is_score(*p.verdict)) continue;
    auto it = gold_by_id.find(p.message_id);
    if (it == gold_by_id.end()) throw AlignmentError("prediction for unknown id '" + p.message_id + "'");
    out.push_back({std::get<double>(*p.verdict), it->second});
  }
  return out;
}

json to_json(const EvalReport& r) {
  json per_class = json::object();
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& m = r.per_class[k];
    per_class[std::to_string(k)] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                                    {"support", m.support},     {"degenerate", m.degenerate}};
  }
  return json{{"confusion", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}},
              {"per_class", per_class},
              {"macro_f1", r.macro_f1},
              {"accuracy", r.accuracy},
              {"unparsable", r.unparsable},
              {"metadata", r.metadata}};
}

json to_json(const ThresholdResult& r) {
  json curve = json::array();
  for (const auto& p : r.curve) curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
  return json{{"threshold", r.threshold},
              {"objective", std::string(to_string(r.objective))},
              {"objective_value", r.objective_value},
              {"curve", curve}};
}

std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& columns) {
  std::size_t width = 8;
  for (const auto& [name, _] : columns) width = std::max(width, name.size() + 2);
  std::ostringstream out;
  auto cell = [&](const std::string& s) {
    out << s << std::string(width > s.size() ? width - s.size() : 1, ' ');
  };
  auto row = [&](const std::string& metric, const std::string& cls, auto getter) {
    out << metric << std::string(11 - metric.size(), ' ') << cls << std::string(7 - cls.size(), ' ');
    for (const auto& [_, r] : columns) cell(format_fixed(getter(r), 2));
    out << "\n";
  };
  out << "Metric     Class  ";
  for (const auto& [name, _] : columns) cell(name);
  out << "\n";
  row("Precision", "0", [](const EvalReport& r) { return r.negative().precision; });
  row("", "1", [](const EvalReport& r) { return r.positive().precision; });
  row("Recall", "0", [](const EvalReport& r) { return r.negative().recall; });
  row("", "1", [](const EvalReport& r) { return r.positive().recall; });
  row("F1 score", "0", [](const EvalReport& r) { return r.negative().f1; });
  row("", "1", [](const EvalReport& r) { return r.positive().f1; });
  row("", "macro", [](const EvalReport& r) { return r.macro_f1; });
  row("Accuracy", "", [](const EvalReport& r) { return r.accuracy; });
  out << "Unparsable        ";
  for (const auto& [_, r] : columns) cell(std::to_string(r.unparsable));
  out << "\n";
  return out.str();
}

}  // namespace ctharness::eval
