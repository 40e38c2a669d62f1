#include "ctharness/analysis.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include "ctharness/error.hpp"
#include "ctharness/util.hpp"

namespace ctharness::analysis {

using corpus::Label;
using nlohmann::json;

namespace {

std::optional<bool> predicted_positive(const parsers::Prediction& p, std::optional<double> threshold) {
  if (!p.verdict) return std::nullopt;
  if (const auto* l = std::get_if<Label>(&*p.verdict)) return *l == Label::positive;
  if (!threshold) return std::nullopt;
  return std::get<double>(*p.verdict) >= *threshold;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

FragmentationBreakdown breakdown_by_fragmentation(const std::vector<parsers::Prediction>& preds,
                                                  const std::vector<corpus::LabeledExample>& gold,
                                                  std::optional<double> threshold) {
  std::unordered_map<std::string, const parsers::Prediction*> by_id;
  for (const auto& p : preds) by_id.emplace(p.message_id, &p);

  FragmentationBreakdown out;
  std::array<std::size_t, 3> detected{};
  std::array<std::size_t, 3> decided{};
  std::array<double, 3> score_sum{};
  std::array<std::size_t, 3> scored{};
  bool saw_label = false;
  bool saw_score = false;

  for (const auto& g : gold) {
    if (g.label != Label::positive) continue;
    if (!g.annotation || !g.annotation->ct_present || g.annotation->components.empty()) {
      ++out.excluded_missing_components;
      continue;
    }
    const auto it = by_id.find(g.message.id);
    if (it == by_id.end()) throw AlignmentError("no prediction for gold positive '" + g.message.id + "'");
    const auto& p = *it->second;
    if (!p.verdict) {
      ++out.excluded_unparsable;
      continue;
    }
    const auto score = static_cast<std::size_t>(corpus::fragmentation_score(*g.annotation));
    ++out.per_score[score].n;
    if (const auto* s = std::get_if<double>(&*p.verdict)) {
      saw_score = true;
      score_sum[score] += *s;
      ++scored[score];
    } else {
      saw_label = true;
    }
    if (auto pos = predicted_positive(p, threshold)) {
      ++decided[score];
      if (*pos) ++detected[score];
    }
  }

  for (std::size_t s = 0; s < 3; ++s) {
    auto& cell = out.per_score[s];
    if (decided[s] > 0) cell.detection_rate = static_cast<double>(detected[s]) / static_cast<double>(decided[s]);
    if (scored[s] > 0) cell.mean_score = score_sum[s] / static_cast<double>(scored[s]);
  }
  if (saw_score && !saw_label) {
    out.grouping = threshold ? "mean raw score; detection rate at threshold " + format_fixed(*threshold, 4)
                             : "mean raw score";
  } else if (saw_label && !saw_score) {
    out.grouping = "fraction of binary verdicts predicted positive";
  } else if (saw_label) {
    out.grouping = "mixed binary and score verdicts";
  } else {
    out.grouping = "no scored items";
  }
  return out;
}

ChannelReport channel_report(const std::vector<parsers::Prediction>& preds,
                             const std::vector<corpus::Message>& messages, std::size_t min_messages,
                             std::optional<double> threshold) {
  std::unordered_map<std::string, const corpus::Message*> by_id;
  for (const auto& m : messages) by_id.emplace(m.id, &m);

  std::vector<std::string> unresolved;
  std::map<std::string, ChannelRow> channels;
  ChannelReport report;
  report.min_messages = min_messages;
  for (const auto& p : preds) {
    const auto it = by_id.find(p.message_id);
    if (it == by_id.end()) {
      unresolved.push_back(p.message_id);
      continue;
    }
    const auto pos = predicted_positive(p, threshold);
    if (!pos) {
      if (p.verdict) throw CalibrationError("score predictions need a threshold for channel aggregation");
      ++report.unparsable;
      continue;
    }
    auto& row = channels[it->second->channel_id];
    row.channel_id = it->second->channel_id;
    ++row.n_messages;
    if (*pos) ++row.n_positive;
  }
  if (!unresolved.empty()) {
    std::string ids;
    for (const auto& id : unresolved) ids += (ids.empty() ? "" : ", ") + id;
    throw AlignmentError("predictions reference unknown message id(s): " + ids);
  }

  std::size_t total_pos = 0;
  for (auto& [_, row] : channels) {
    row.share = static_cast<double>(row.n_positive) / static_cast<double>(row.n_messages);
    report.total_messages += row.n_messages;
    total_pos += row.n_positive;
    if (row.n_messages >= min_messages) report.rows.push_back(row);
  }
  report.pooled_share =
      report.total_messages ? static_cast<double>(total_pos) / static_cast<double>(report.total_messages) : 0.0;
  std::sort(report.rows.begin(), report.rows.end(), [](const ChannelRow& a, const ChannelRow& b) {
    return a.share != b.share ? a.share > b.share : a.channel_id < b.channel_id;
  });
  if (!report.rows.empty()) {
    // Rows are already share-ordered, so the sum does not depend on input order.
    double sum = 0.0;
    for (const auto& r : report.rows) sum += r.share;
    report.mean_share_per_channel = sum / static_cast<double>(report.rows.size());
  }
  return report;
}

json to_json(const FragmentationBreakdown& b) {
  json per = json::object();
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& c = b.per_score[s];
    per[std::to_string(s)] = {{"n", c.n},
                              {"detection_rate", optional_number(c.detection_rate)},
                              {"mean_score", optional_number(c.mean_score)}};
  }
  return json{{"per_score", per},
              {"grouping", b.grouping},
              {"excluded_missing_components", b.excluded_missing_components},
              {"excluded_unparsable", b.excluded_unparsable}};
}

json to_json(const ChannelReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"channel_id", row.channel_id},
                    {"n_messages", row.n_messages},
                    {"n_positive", row.n_positive},
                    {"share", row.share}});
  }
  return json{{"rows", rows},
              {"filters", {{"min_messages", r.min_messages}}},
              {"overall",
               {{"mean_share_per_channel", optional_number(r.mean_share_per_channel)},
                {"pooled_share", r.pooled_share},
                {"total_messages", r.total_messages},
                {"unparsable", r.unparsable}}}};
}

std::string render_table(const FragmentationBreakdown& b) {
  std::ostringstream out;
  out << "fragmentation score  n      detection rate  mean score\n";
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& c = b.per_score[s];
    std::string n = std::to_string(c.n);
    std::string rate = c.detection_rate ? format_fixed(*c.detection_rate, 2) : "--";
    std::string mean = c.mean_score ? format_fixed(*c.mean_score, 2) : "--";
    out << std::to_string(s) << std::string(20, ' ') << n << std::string(n.size() < 7 ? 7 - n.size() : 1, ' ')
        << rate << std::string(rate.size() < 16 ? 16 - rate.size() : 1, ' ') << mean << "\n";
  }
  out << "(" << b.grouping << ")\n";
  return out.str();
}

std::string render_table(const ChannelReport& r) {
  std::size_t width = 10;
  for (const auto& row : r.rows) width = std::max(width, row.channel_id.size() + 2);
  std::ostringstream out;
  out << "channel" << std::string(width - 7, ' ') << "messages  positive  share\n";
  for (const auto& row : r.rows) {
    const auto n = std::to_string(row.n_messages);
    const auto p = std::to_string(row.n_positive);
    out << row.channel_id << std::string(width - row.channel_id.size(), ' ') << n
        << std::string(n.size() < 10 ? 10 - n.size() : 1, ' ') << p
        << std::string(p.size() < 10 ? 10 - p.size() : 1, ' ') << format_fixed(100.0 * row.share, 2) << "%\n";
  }
  out << "mean share per channel: "
      << (r.mean_share_per_channel ? format_fixed(100.0 * *r.mean_share_per_channel, 2) + "%" : std::string("--"))
      << "\npooled share: " << format_fixed(100.0 * r.pooled_share, 2) << "% of " << r.total_messages
      << " messages\n";
  return out.str();
}

std::string to_csv(const ChannelReport& r) {
  std::string out = "channel_id,n_messages,n_positive,share\n";
  for (const auto& row : r.rows) {
    out += csv_escape(row.channel_id) + "," + std::to_string(row.n_messages) + "," + std::to_string(row.n_positive) +
           "," + format_fixed(row.share, 6) + "\n";
  }
  return out;
}

}  // namespace ctharness::analysis
