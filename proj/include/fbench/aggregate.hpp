#pragma once

// Summaries over seeds, optimizer rankings and the two report tables.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbench/optimizer.hpp"
#include "fbench/results.hpp"

namespace fb {

struct Summary {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample std / sqrt(n); 0 when n == 1
  std::size_t n = 0;
  std::size_t excluded = 0;  // missing values left out
};

// Throws UsageError when no value is present.
Summary summarize(std::span<const std::optional<double>> values);
Summary summarize(std::span<const double> values);

struct GroupKey {
  std::string testbed;
  std::string optimizer;
  double alpha = 0.0;
  std::string metric;

  auto operator<=>(const GroupKey&) const = default;
};

struct SummaryRow {
  GroupKey key;
  Summary summary;
};

// One summary per (testbed, optimizer, alpha, metric) group, in key order.
// Runs that did not complete count as excluded for supervised metrics; a
// group with no values is left out and its key added to `empty` when given.
std::vector<SummaryRow> aggregate(const std::vector<ResultRow>& rows, std::span<const std::string> metrics,
                                  std::vector<GroupKey>* empty = nullptr);

enum class Direction { higher_is_better, lower_is_better };

struct RankEntry {
  OptimizerKind kind = OptimizerKind::sgd;
  int rank = 0;
  bool tied = false;
  std::string label() const { return (tied ? "=" : "") + std::to_string(rank); }
};

struct Ranking {
  std::vector<RankEntry> entries;  // best first
  bool partial = false;            // an optimizer was missing
  bool meaningful = true;          // false renders as "-"

  std::string label(OptimizerKind kind) const;
};

// Neighbouring means closer than sqrt(se_a^2 + se_b^2) share a rank; ties
// chain along the sorted order.
Ranking rank_optimizers(const std::map<OptimizerKind, Summary>& summaries, Direction direction);

// Mean +- standard error per optimizer of phase lengths (supervised) or
// RMSVE (RL), with completed-run counts.
std::string render_table4(const std::vector<ResultRow>& rows);
// Ranks per metric and testbed.
std::string render_table7(const std::vector<ResultRow>& rows);

// The statistic each ranking row uses, by testbed kind.
struct RankedMetric {
  std::string name;
  std::string column;
  Direction direction;
};
std::vector<RankedMetric> ranked_metrics(bool supervised);

// Rankings for every metric of one testbed present in `rows`.
std::map<std::string, Ranking> rankings_for(const std::vector<ResultRow>& rows, const std::string& testbed);

}  // namespace fb
