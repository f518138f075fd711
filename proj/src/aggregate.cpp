#include "fbench/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "fbench/error.hpp"

namespace fb {

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw UsageError("cannot summarize an empty group");
  Summary s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

Summary summarize(std::span<const std::optional<double>> values) {
  std::vector<double> present;
  std::size_t missing = 0;
  for (const auto& v : values) {
    if (v)
      present.push_back(*v);
    else
      ++missing;
  }
  Summary s = summarize(present);
  s.excluded = missing;
  return s;
}

namespace {

bool counts_for(const ResultRow& row) { return row.status == to_string(RunStatus::completed); }

}  // namespace

std::vector<SummaryRow> aggregate(const std::vector<ResultRow>& rows, std::span<const std::string> metrics,
                                  std::vector<GroupKey>* empty) {
  std::map<GroupKey, std::vector<std::optional<double>>> groups;
  for (const auto& row : rows)
    for (const auto& m : metrics) {
      GroupKey key{row.testbed, row.optimizer, row.alpha, m};
      groups[key].push_back(counts_for(row) ? row.metric(m) : std::nullopt);
    }
  std::vector<SummaryRow> out;
  for (const auto& [key, values] : groups) {
    if (std::none_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); })) {
      if (empty) empty->push_back(key);
      continue;
    }
    out.push_back({key, summarize(values)});
  }
  return out;
}

std::string Ranking::label(OptimizerKind kind) const {
  if (!meaningful) return "-";
  for (const auto& e : entries)
    if (e.kind == kind) return e.label();
  return "";
}

Ranking rank_optimizers(const std::map<OptimizerKind, Summary>& summaries, Direction direction) {
  Ranking ranking;
  ranking.partial = summaries.size() < 4;
  std::vector<std::pair<OptimizerKind, Summary>> order(summaries.begin(), summaries.end());
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    return direction == Direction::higher_is_better ? a.second.mean > b.second.mean : a.second.mean < b.second.mean;
  });
  int group_rank = 1;
  std::size_t group_start = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0) {
      const Summary& a = order[i - 1].second;
      const Summary& b = order[i].second;
      const double pooled = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
      const bool tied = std::abs(a.mean - b.mean) < pooled || a.mean == b.mean;
      if (!tied) {
        group_start = i;
        group_rank = static_cast<int>(i) + 1;
      }
    }
    ranking.entries.push_back({order[i].first, group_rank, false});
    if (i > group_start)
      for (std::size_t j = group_start; j <= i; ++j) ranking.entries[j].tied = true;
  }
  return ranking;
}

std::vector<RankedMetric> ranked_metrics(bool supervised) {
  if (supervised)
    return {{"Retention", "retention", Direction::higher_is_better},
            {"Relearning", "relearning", Direction::higher_is_better},
            {"Activation Overlap", "overlap_last_phase", Direction::lower_is_better},
            {"Pairwise Interference", "interference_last_phase", Direction::lower_is_better}};
  return {{"Activation Overlap", "overlap_final", Direction::lower_is_better},
          {"Pairwise Interference", "interference_final", Direction::lower_is_better}};
}

namespace {

const std::vector<OptimizerKind>& all_kinds() {
  static const std::vector<OptimizerKind> kinds{OptimizerKind::adam, OptimizerKind::momentum, OptimizerKind::rmsprop,
                                                OptimizerKind::sgd};
  return kinds;
}

std::vector<std::string> testbeds_in(const std::vector<ResultRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (std::find(out.begin(), out.end(), r.testbed) == out.end()) out.push_back(r.testbed);
  return out;
}

std::string fmt(const char* f, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace

std::map<std::string, Ranking> rankings_for(const std::vector<ResultRow>& rows, const std::string& testbed) {
  std::vector<ResultRow> mine;
  std::map<std::string, std::set<std::string>> configs;
  for (const auto& r : rows)
    if (r.testbed == testbed) {
      mine.push_back(r);
      configs[r.optimizer].insert(format_number(r.alpha) + "/" + (r.mu ? format_number(*r.mu) : "") + "/" +
                                  (r.rho ? format_number(*r.rho) : ""));
    }
  for (const auto& [opt, set] : configs)
    if (set.size() > 1)
      throw UsageError("results for " + testbed + " hold several configurations of " + opt +
                       "; rankings need one per optimizer");

  std::map<std::string, Ranking> out;
  const bool supervised = is_supervised(testbed_from_string(testbed));
  for (const auto& m : ranked_metrics(supervised)) {
    const std::string cols[] = {m.column};
    const auto summary_rows = aggregate(mine, cols);
    if (summary_rows.empty()) continue;
    std::map<OptimizerKind, Summary> by_kind;
    for (const auto& s : summary_rows) by_kind[optimizer_kind_from_string(s.key.optimizer)] = s.summary;
    Ranking r = rank_optimizers(by_kind, m.direction);
    if (m.column == "retention")
      r.meaningful = std::any_of(by_kind.begin(), by_kind.end(), [](const auto& kv) { return kv.second.mean >= 0.01; });
    out[m.name] = r;
  }
  return out;
}

std::string render_table4(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  for (const auto& tb : testbeds_in(rows)) {
    const bool supervised = is_supervised(testbed_from_string(tb));
    std::vector<ResultRow> mine;
    for (const auto& r : rows)
      if (r.testbed == tb) mine.push_back(r);
    const std::vector<std::string> cols =
        supervised ? std::vector<std::string>{"phase1", "phase2", "phase3", "phase4", "retention", "relearning"}
                   : std::vector<std::string>{"rmsve_final", "rmsve_mean", "rmsve_auc"};
    out << "# " << tb << "\n";
    out << "optimizer\talpha\tcompleted";
    for (const auto& c : cols) out << '\t' << c;
    out << '\n';
    const auto summaries = aggregate(mine, cols);
    std::map<std::pair<std::string, double>, std::map<std::string, Summary>> table;
    for (const auto& s : summaries) table[{s.key.optimizer, s.key.alpha}][s.key.metric] = s.summary;
    std::map<std::pair<std::string, double>, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& r : mine) {
      auto& c = counts[{r.optimizer, r.alpha}];
      ++c.second;
      if (r.status == to_string(RunStatus::completed)) ++c.first;
    }
    for (const auto& [key, c] : counts) {
      out << key.first << '\t' << format_number(key.second) << '\t' << c.first << '/' << c.second;
      for (const auto& col : cols) {
        const auto it = table[key].find(col);
        out << '\t' << (it == table[key].end() ? std::string("-") : fmt("%.5g+-%.3g", it->second.mean, it->second.stderr_));
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string render_table7(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << "metric\ttestbed";
  for (OptimizerKind k : all_kinds()) out << '\t' << to_string(k);
  out << '\n';
  for (const auto& tb : testbeds_in(rows)) {
    const auto rankings = rankings_for(rows, tb);
    for (const auto& m : ranked_metrics(is_supervised(testbed_from_string(tb)))) {
      const auto it = rankings.find(m.name);
      if (it == rankings.end()) continue;
      out << m.name << '\t' << tb;
      for (OptimizerKind k : all_kinds()) {
        const std::string l = it->second.label(k);
        out << '\t' << (l.empty() ? "?" : l);
      }
      if (it->second.partial) out << "\t(partial)";
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace fb
