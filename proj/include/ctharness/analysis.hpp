#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctharness/corpus.hpp"
#include "ctharness/parsers.hpp"

namespace ctharness::analysis {

struct FragmentationCell {
  std::size_t n = 0;
  std::optional<double> detection_rate;  // needs a label or a threshold
  std::optional<double> mean_score;      // probabilistic verdicts only
};

struct FragmentationBreakdown {
  std::array<FragmentationCell, 3> per_score{};  // index = fragmentation score 0..2
  std::string grouping;
  std::size_t excluded_missing_components = 0;
  std::size_t excluded_unparsable = 0;
};

// Groups gold positives by fragmentation score. Binary verdicts give the
// detection rate directly. Score verdicts give the mean raw score, and a
// detection rate too when a calibrated threshold is supplied.
FragmentationBreakdown breakdown_by_fragmentation(const std::vector<parsers::Prediction>& preds,
                                                  const std::vector<corpus::LabeledExample>& gold,
                                                  std::optional<double> threshold = std::nullopt);

struct ChannelRow {
  std::string channel_id;
  std::size_t n_messages = 0;
  std::size_t n_positive = 0;
  double share = 0.0;
};

struct ChannelReport {
  std::vector<ChannelRow> rows;  // share descending, then channel id
  std::size_t min_messages = 0;
  std::optional<double> mean_share_per_channel;  // unweighted over `rows`; empty when no row passes
  double pooled_share = 0.0;                     // over every channel, before filtering
  std::size_t total_messages = 0;
  std::size_t unparsable = 0;
};

inline constexpr std::size_t kDefaultMinMessages = 500;

ChannelReport channel_report(const std::vector<parsers::Prediction>& preds,
                             const std::vector<corpus::Message>& messages, std::size_t min_messages,
                             std::optional<double> threshold = std::nullopt);

nlohmann::json to_json(const FragmentationBreakdown& b);
nlohmann::json to_json(const ChannelReport& r);
std::string render_table(const FragmentationBreakdown& b);
std::string render_table(const ChannelReport& r);
std::string to_csv(const ChannelReport& r);

}  // namespace ctharness::analysis
