#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctharness/eval.hpp"

namespace ctharness::stats {

inline constexpr double kDefaultAlpha = 0.05;

// Outcome pairs of two classifiers on a shared test set. n10 counts items
// model A got right and model B got wrong; n01 the reverse.
struct PairedOutcomes {
  std::size_t n00 = 0;
  std::size_t n01 = 0;
  std::size_t n10 = 0;
  std::size_t n11 = 0;

  std::size_t total() const { return n00 + n01 + n10 + n11; }
};

enum class Method { mcnemar_exact, mcnemar_chi2, welch_t, paired_t };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Method method = Method::mcnemar_exact;
  bool significant = false;
  double alpha = kDefaultAlpha;
  bool degenerate = false;
  std::optional<double> df;
  // McNemar reports both variants when the discordant count is near the switch.
  std::optional<double> p_exact;
  std::optional<double> p_chi2;
};

std::string_view to_string(Method m);

// Discordant total below this uses the exact binomial test.
inline constexpr std::size_t kMcNemarExactBelow = 25;

PairedOutcomes paired_outcomes(std::span<const eval::LabeledId> gold, std::span<const eval::LabeledId> pred_a,
                               std::span<const eval::LabeledId> pred_b);

// Two-sided exact binomial p for the discordant pair (b, c): min(1, 2 P[Bin(b+c, 1/2) <= min(b, c)]).
double mcnemar_exact_p(std::size_t b, std::size_t c);
// Continuity-corrected statistic max(0, |b-c| - 1)^2 / (b+c).
double mcnemar_chi2_statistic(std::size_t b, std::size_t c);
double chi2_1df_survival(double x);

TestResult mcnemar(const PairedOutcomes& pairs, double alpha = kDefaultAlpha);

TestResult welch_t(std::span<const double> runs_a, std::span<const double> runs_b, double alpha = kDefaultAlpha);
TestResult paired_t(std::span<const double> runs_a, std::span<const double> runs_b, double alpha = kDefaultAlpha);

// Two-sided p for Student t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> xs);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

std::map<std::string, MeanSd> aggregate_runs(const std::vector<eval::EvalReport>& reports);
std::map<std::string, MeanSd> aggregate_runs(const std::vector<std::map<std::string, double>>& runs);

struct Disagreement {
  double rate = 0.0;
  std::vector<std::string> ids;
};

Disagreement disagreement(std::span<const eval::LabeledId> pred_a, std::span<const eval::LabeledId> pred_b);

nlohmann::json to_json(const TestResult& r);
nlohmann::json to_json(const std::map<std::string, MeanSd>& agg);
std::string format_mean_sd(const MeanSd& v, int decimals = 2);

}  // namespace ctharness::stats
