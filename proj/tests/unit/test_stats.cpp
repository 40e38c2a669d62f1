#include <doctest.h>

#include <cmath>

#include "ctharness/error.hpp"
#include "ctharness/stats.hpp"
#include "ctharness/util.hpp"

using namespace ctharness;
using namespace ctharness::stats;
using corpus::Label;
using doctest::Approx;

namespace {

// Exact two-sided binomial p from integer binomial coefficients (Pascal's triangle).
double binomial_oracle(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next(row.size() + 1, 0);
    for (std::size_t k = 0; k < row.size(); ++k) {
      next[k] += row[k];
      next[k + 1] += row[k];
    }
    row = std::move(next);
  }
  std::uint64_t tail = 0;
  for (std::size_t k = 0; k <= std::min(b, c); ++k) tail += row[k];
  return std::min(1.0, 2.0 * static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(n)));
}

// Sample with the requested mean and sample sd: mean +- sd * sqrt((n-1)/n), alternating.
std::vector<double> moment_matched(double mean, double sd, std::size_t n) {
  std::vector<double> v(n);
  const double half = sd * std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) v[i] = mean + (i % 2 == 0 ? half : -half);
  return v;
}

}  // namespace

TEST_CASE("exact McNemar examples") {
  CHECK(mcnemar_exact_p(10, 2) == 158.0 / 4096.0);
  const auto r = mcnemar(PairedOutcomes{0, 2, 10, 0});
  CHECK(r.method == Method::mcnemar_exact);
  CHECK(r.p_value == Approx(0.0386).epsilon(1e-3));
  CHECK(r.significant);
  CHECK(mcnemar(PairedOutcomes{5, 7, 7, 5}).p_value == 1.0);
}

TEST_CASE("exact McNemar equals enumeration for small tables") {
  for (std::size_t n = 1; n <= 40; ++n) {
    for (std::size_t b = 0; b <= n; ++b) {
      const double expected = binomial_oracle(b, n - b);
      const double got = mcnemar_exact_p(b, n - b);
      CAPTURE(b);
      CAPTURE(n);
      CHECK(std::abs(got - expected) <= 1e-15 * std::max(1.0, expected));
    }
  }
}

TEST_CASE("large tables use the log-space path") {
  const double p = mcnemar_exact_p(600, 560);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  // Normal approximation with continuity correction as a loose cross-check.
  const double z = (std::abs(600.0 - 560.0) - 1.0) / std::sqrt(1160.0);
  CHECK(p == Approx(std::erfc(z / std::sqrt(2.0))).epsilon(0.02));
}

TEST_CASE("chi-square McNemar") {
  CHECK(mcnemar_chi2_statistic(40, 20) == Approx(361.0 / 60.0).epsilon(1e-15));
  const auto r = mcnemar(PairedOutcomes{0, 20, 40, 0});
  CHECK(r.method == Method::mcnemar_chi2);
  CHECK(r.statistic == Approx(6.016667).epsilon(1e-6));
  CHECK(r.p_value == Approx(0.014171).epsilon(1e-4));
  CHECK_FALSE(r.p_exact.has_value());
  // The continuity correction never drives the statistic below zero.
  CHECK(mcnemar_chi2_statistic(15, 15) == 0.0);
  CHECK(chi2_1df_survival(3.841458820694124) == Approx(0.05).epsilon(1e-9));
}

TEST_CASE("McNemar switch boundary and degenerate case") {
  CHECK(mcnemar(PairedOutcomes{0, 12, 12, 0}).method == Method::mcnemar_exact);
  const auto at = mcnemar(PairedOutcomes{0, 12, 13, 0});
  CHECK(at.method == Method::mcnemar_chi2);
  CHECK(at.p_exact.has_value());
  CHECK(at.p_chi2.has_value());
  for (std::size_t n = 25; n <= 40; ++n) {
    for (std::size_t b = 0; b <= n; ++b) {
      CHECK(std::abs(mcnemar_exact_p(b, n - b) - chi2_1df_survival(mcnemar_chi2_statistic(b, n - b))) <= 0.02);
    }
  }
  const auto d = mcnemar(PairedOutcomes{10, 0, 0, 30});
  CHECK(d.degenerate);
  CHECK(d.p_value == 1.0);
  CHECK_FALSE(d.significant);
  CHECK_THROWS_AS(mcnemar(PairedOutcomes{}, 1.5), ValidationError);
}

TEST_CASE("McNemar is symmetric under swapping models") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const PairedOutcomes p{rng.below(100), rng.below(60), rng.below(60), rng.below(100)};
    const PairedOutcomes q{p.n00, p.n10, p.n01, p.n11};
    const auto a = mcnemar(p);
    const auto b = mcnemar(q);
    CHECK(a.p_value == b.p_value);
    CHECK(a.statistic == b.statistic);
    CHECK(a.significant == (a.p_value < a.alpha));
  }
}

TEST_CASE("paired outcomes from aligned predictions") {
  const std::vector<eval::LabeledId> gold{{"a", Label::positive}, {"b", Label::negative}, {"c", Label::positive}, {"d", Label::negative}};
  const std::vector<eval::LabeledId> pa{{"a", Label::positive}, {"b", Label::negative}, {"c", Label::negative}, {"d", Label::positive}};
  const std::vector<eval::LabeledId> pb{{"a", Label::positive}, {"b", Label::positive}, {"c", Label::positive}, {"d", Label::positive}};
  const auto p = paired_outcomes(gold, pa, pb);
  CHECK(p.n11 == 1);
  CHECK(p.n10 == 1);
  CHECK(p.n01 == 1);
  CHECK(p.n00 == 1);
  auto shuffled = pb;
  std::swap(shuffled[0], shuffled[1]);
  CHECK_THROWS_AS(paired_outcomes(gold, pa, shuffled), AlignmentError);
}

TEST_CASE("Welch t on moment-matched samples") {
  const auto a = moment_matched(0.68, 0.02, 10);
  const auto b = moment_matched(0.70, 0.03, 10);
  CHECK(mean(a) == Approx(0.68).epsilon(1e-12));
  CHECK(sample_sd(b) == Approx(0.03).epsilon(1e-12));
  const auto r = welch_t(a, b);
  CHECK(r.method == Method::welch_t);
  CHECK(r.statistic == Approx(-1.754116).epsilon(1e-6));
  CHECK(std::abs(std::abs(r.statistic) - 1.754) < 1e-3);
  REQUIRE(r.df.has_value());
  CHECK(*r.df == Approx(15.680).epsilon(1e-4));
  CHECK(r.p_value == Approx(0.0989).epsilon(1e-2));
  CHECK_FALSE(r.significant);

  const auto swapped = welch_t(b, a);
  CHECK(swapped.statistic == -r.statistic);
  CHECK(swapped.p_value == r.p_value);
}

TEST_CASE("Welch t degenerate and invalid inputs") {
  const std::vector<double> same{0.5, 0.6, 0.7};
  auto r = welch_t(same, same);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == Approx(1.0));
  const std::vector<double> flat_a{0.5, 0.5};
  const std::vector<double> flat_b{0.6, 0.6};
  r = welch_t(flat_a, flat_a);
  CHECK(r.degenerate);
  CHECK(r.p_value == 1.0);
  r = welch_t(flat_a, flat_b);
  CHECK(r.degenerate);
  CHECK(r.p_value == 0.0);
  const std::vector<double> one{0.5};
  CHECK_THROWS_AS(welch_t(one, flat_a), ValidationError);
}

TEST_CASE("paired t") {
  const std::vector<double> a{0.70, 0.72, 0.69, 0.71, 0.73};
  const std::vector<double> b{0.68, 0.69, 0.69, 0.70, 0.70};
  const auto r = paired_t(a, b);
  // d = {.02,.03,0,.01,.03}: mean .018, sd .013038...
  CHECK(r.statistic == Approx(0.018 / (std::sqrt(0.00017) / std::sqrt(5.0))).epsilon(1e-9));
  CHECK(*r.df == 4.0);
  const std::vector<double> shorter{0.1, 0.2};
  CHECK_THROWS_AS(paired_t(a, shorter), AlignmentError);
}

TEST_CASE("student t tail values") {
  CHECK(student_t_two_sided_p(0.0, 5.0) == Approx(1.0));
  CHECK(student_t_two_sided_p(2.228138851986274, 10.0) == Approx(0.05).epsilon(1e-9));
}

TEST_CASE("aggregate runs") {
  std::vector<std::map<std::string, double>> runs;
  for (int i = 0; i < 10; ++i) runs.push_back({{"f1_1", i % 2 == 0 ? 0.66 : 0.70}, {"accuracy", 0.8}});
  const auto agg = aggregate_runs(runs);
  CHECK(agg.at("f1_1").mean == Approx(0.68).epsilon(1e-12));
  CHECK(agg.at("f1_1").sd == Approx(std::sqrt(10 * 0.0004 / 9.0)).epsilon(1e-12));
  CHECK(agg.at("accuracy").sd == 0.0);
  CHECK(format_mean_sd(agg.at("f1_1")) == "0.68 ± 0.02");

  auto reversed = runs;
  std::reverse(reversed.begin(), reversed.end());
  std::swap(reversed[2], reversed[7]);
  CHECK(aggregate_runs(reversed).at("f1_1").mean == agg.at("f1_1").mean);
  CHECK(aggregate_runs(reversed).at("f1_1").sd == agg.at("f1_1").sd);

  std::vector<std::map<std::string, double>> one{runs[0]};
  CHECK_THROWS_AS(aggregate_runs(one), AggregationError);
  runs[3] = {{"f1_1", 0.7}};
  CHECK_THROWS_AS(aggregate_runs(runs), AggregationError);

  std::vector<eval::EvalReport> reports(3, eval::metrics(eval::ConfusionCounts{5, 1, 2, 8}));
  const auto same = aggregate_runs(reports);
  for (const auto& [k, v] : same) CHECK(v.sd == 0.0);
  CHECK(same.contains("f1_macro"));
}

TEST_CASE("disagreement") {
  std::vector<eval::LabeledId> a, b;
  for (int i = 0; i < 345; ++i) {
    const auto id = "m" + std::to_string(i);
    a.push_back({id, Label::negative});
    b.push_back({id, i < 52 ? Label::positive : Label::negative});
  }
  auto d = disagreement(a, b);
  CHECK(d.rate == Approx(52.0 / 345.0).epsilon(1e-15));
  CHECK(d.ids.size() == 52);
  CHECK(disagreement(a, a).rate == 0.0);
  CHECK(disagreement(a, a).ids.empty());
  for (auto& x : b) x.label = Label::positive;
  CHECK(disagreement(a, b).rate == 1.0);
  b.pop_back();
  CHECK_THROWS_AS(disagreement(a, b), AlignmentError);
}
