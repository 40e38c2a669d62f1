#include "ctharness/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::stats {

using nlohmann::json;

namespace {

// Both McNemar variants are attached to the result inside this window around the switch.
constexpr std::size_t kBoundaryLow = 15;
constexpr std::size_t kBoundaryHigh = 40;

void finish(TestResult& r, double alpha) {
  r.alpha = alpha;
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.significant = r.p_value < alpha;
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

// Sorting first makes the floating sums independent of input order.
std::vector<double> sorted_copy(std::span<const double> xs) {
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  return v;
}

// Shifted by the first value, so a constant sample has exactly zero variance.
double variance_sorted(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double shift = v.front();
  double m = 0.0;
  for (double x : v) m += x - shift;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - shift - m) * (x - shift - m);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::mcnemar_exact: return "mcnemar_exact";
    case Method::mcnemar_chi2: return "mcnemar_chi2";
    case Method::welch_t: return "welch_t";
    case Method::paired_t: return "paired_t";
  }
  return "?";
}

PairedOutcomes paired_outcomes(std::span<const eval::LabeledId> gold, std::span<const eval::LabeledId> pred_a,
                               std::span<const eval::LabeledId> pred_b) {
  if (gold.size() != pred_a.size() || gold.size() != pred_b.size()) {
    throw AlignmentError("paired outcomes need equally long gold and prediction lists");
  }
  PairedOutcomes p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred_a[i].id != gold[i].id || pred_b[i].id != gold[i].id) {
      throw AlignmentError("position " + std::to_string(i) + ": ids differ between gold and predictions");
    }
    const bool a = pred_a[i].label == gold[i].label;
    const bool b = pred_b[i].label == gold[i].label;
    if (a && b) ++p.n11;
    else if (a) ++p.n10;
    else if (b) ++p.n01;
    else ++p.n00;
  }
  return p;
}

double mcnemar_exact_p(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return 1.0;
  const std::size_t k_max = std::min(b, c);
  double cdf = 0.0;
  if (n <= 1000) {
    // C(n, k) by the multiplicative recurrence; exact in doubles while C(n, k) < 2^53.
    double coeff = 1.0;
    double sum = 0.0;
    for (std::size_t k = 0; k <= k_max; ++k) {
      sum += coeff;
      coeff = coeff * static_cast<double>(n - k) / static_cast<double>(k + 1);
    }
    cdf = std::ldexp(sum, -static_cast<int>(n));
  } else {
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    std::vector<double> terms;
    terms.reserve(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) {
      terms.push_back(std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                      std::lgamma(static_cast<double>(n - k) + 1.0) + log_half_n);
    }
    const double peak = *std::max_element(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - peak);
    cdf = std::exp(peak) * sum;
  }
  return std::min(1.0, 2.0 * cdf);
}

double mcnemar_chi2_statistic(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return 0.0;
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c));
  const double corrected = std::max(0.0, diff - 1.0);
  return corrected * corrected / static_cast<double>(n);
}

double chi2_1df_survival(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

TestResult mcnemar(const PairedOutcomes& pairs, double alpha) {
  require_alpha(alpha);
  const std::size_t b = pairs.n10;
  const std::size_t c = pairs.n01;
  const std::size_t n = b + c;
  TestResult r;
  if (n == 0) {
    r.method = Method::mcnemar_exact;
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.degenerate = true;
    finish(r, alpha);
    return r;
  }
  const double p_exact = mcnemar_exact_p(b, c);
  const double chi2 = mcnemar_chi2_statistic(b, c);
  const double p_chi2 = chi2_1df_survival(chi2);
  if (n < kMcNemarExactBelow) {
    r.method = Method::mcnemar_exact;
    r.statistic = static_cast<double>(std::min(b, c));
    r.p_value = p_exact;
  } else {
    r.method = Method::mcnemar_chi2;
    r.statistic = chi2;
    r.p_value = p_chi2;
  }
  if (n >= kBoundaryLow && n <= kBoundaryHigh) {
    r.p_exact = p_exact;
    r.p_chi2 = p_chi2;
  }
  finish(r, alpha);
  return r;
}

double student_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t_distribution<double> dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw ValidationError("mean of an empty sample");
  const auto v = sorted_copy(xs);
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) throw ValidationError("sample standard deviation needs at least two values");
  return std::sqrt(variance_sorted(sorted_copy(xs)));
}

TestResult welch_t(std::span<const double> runs_a, std::span<const double> runs_b, double alpha) {
  require_alpha(alpha);
  if (runs_a.size() < 2 || runs_b.size() < 2) throw ValidationError("Welch t test needs at least two values per sample");
  for (auto xs : {runs_a, runs_b}) {
    for (double x : xs) {
      if (!std::isfinite(x)) throw ValidationError("Welch t test needs finite values");
    }
  }
  const double na = static_cast<double>(runs_a.size());
  const double nb = static_cast<double>(runs_b.size());
  const double va = variance_sorted(sorted_copy(runs_a)) / na;
  const double vb = variance_sorted(sorted_copy(runs_b)) / nb;
  const double diff = mean(runs_a) - mean(runs_b);
  TestResult r;
  r.method = Method::welch_t;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    r.degenerate = true;
    r.statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    finish(r, alpha);
    return r;
  }
  r.statistic = diff / std::sqrt(se2);
  const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.df = df;
  r.p_value = student_t_two_sided_p(r.statistic, df);
  finish(r, alpha);
  return r;
}

TestResult paired_t(std::span<const double> runs_a, std::span<const double> runs_b, double alpha) {
  require_alpha(alpha);
  if (runs_a.size() != runs_b.size()) throw AlignmentError("paired t test needs samples of equal length");
  if (runs_a.size() < 2) throw ValidationError("paired t test needs at least two pairs");
  std::vector<double> d(runs_a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = runs_a[i] - runs_b[i];
  const double n = static_cast<double>(d.size());
  const double md = mean(d);
  const double sd = sample_sd(d);
  TestResult r;
  r.method = Method::paired_t;
  r.df = n - 1.0;
  if (sd == 0.0) {
    r.degenerate = true;
    r.statistic = md == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), md);
    r.p_value = md == 0.0 ? 1.0 : 0.0;
    finish(r, alpha);
    return r;
  }
  r.statistic = md / (sd / std::sqrt(n));
  r.p_value = student_t_two_sided_p(r.statistic, n - 1.0);
  finish(r, alpha);
  return r;
}

std::map<std::string, MeanSd> aggregate_runs(const std::vector<std::map<std::string, double>>& runs) {
  if (runs.size() < 2) throw AggregationError("aggregation needs at least two runs");
  for (const auto& run : runs) {
    if (run.size() != runs.front().size() ||
        !std::equal(run.begin(), run.end(), runs.front().begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; })) {
      throw AggregationError("runs report different metric keys");
    }
  }
  std::map<std::string, MeanSd> out;
  for (const auto& [key, _] : runs.front()) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const auto& run : runs) values.push_back(run.at(key));
    out[key] = MeanSd{mean(values), sample_sd(values)};
  }
  return out;
}

std::map<std::string, MeanSd> aggregate_runs(const std::vector<eval::EvalReport>& reports) {
  std::vector<std::map<std::string, double>> runs;
  runs.reserve(reports.size());
  for (const auto& r : reports) runs.push_back(r.flat());
  return aggregate_runs(runs);
}

Disagreement disagreement(std::span<const eval::LabeledId> pred_a, std::span<const eval::LabeledId> pred_b) {
  if (pred_a.size() != pred_b.size()) throw AlignmentError("disagreement needs equally long prediction lists");
  Disagreement d;
  for (std::size_t i = 0; i < pred_a.size(); ++i) {
    if (pred_a[i].id != pred_b[i].id) {
      throw AlignmentError("position " + std::to_string(i) + ": '" + pred_a[i].id + "' vs '" + pred_b[i].id + "'");
    }
    if (pred_a[i].label != pred_b[i].label) d.ids.push_back(pred_a[i].id);
  }
  d.rate = pred_a.empty() ? 0.0 : static_cast<double>(d.ids.size()) / static_cast<double>(pred_a.size());
  return d;
}

json to_json(const TestResult& r) {
  json j{{"method", std::string(to_string(r.method))},
         {"statistic", std::isfinite(r.statistic) ? json(r.statistic) : json(r.statistic > 0 ? "inf" : "-inf")},
         {"p_value", r.p_value},
         {"alpha", r.alpha},
         {"significant", r.significant},
         {"degenerate", r.degenerate}};
  if (r.df) j["df"] = *r.df;
  if (r.p_exact) j["p_exact"] = *r.p_exact;
  if (r.p_chi2) j["p_chi2"] = *r.p_chi2;
  return j;
}

json to_json(const std::map<std::string, MeanSd>& agg) {
  json j = json::object();
  for (const auto& [k, v] : agg) j[k] = {{"mean", v.mean}, {"sd", v.sd}};
  return j;
}

std::string format_mean_sd(const MeanSd& v, int decimals) {
  return format_fixed(v.mean, decimals) + " ± " + format_fixed(v.sd, decimals);
}

}  // namespace ctharness::stats
