#include "fbench/sweep.hpp"

#include <cmath>
#include <sstream>

#include "fbench/aggregate.hpp"
#include "fbench/error.hpp"
#include "fbench/results.hpp"
#include "fbench/runner.hpp"

namespace fb {

const SweepCell& select_best(std::span<const SweepCell> cells) {
  const SweepCell* best = nullptr;
  for (const auto& c : cells) {
    if (c.disqualified()) continue;
    if (!best || *c.objective < *best->objective || (*c.objective == *best->objective && c.value > best->value))
      best = &c;
  }
  if (!best) throw SweepFailed("every candidate was unstable or never completed");
  return *best;
}

OptimizerConfig with_value(OptimizerConfig o, SweepParameter p, double value) {
  switch (p) {
    case SweepParameter::alpha: o.alpha = value; break;
    case SweepParameter::mu: o.mu = value; break;
    case SweepParameter::rho: o.rho = value; break;
  }
  return o;
}

namespace {

bool sweeps(OptimizerKind k, SweepParameter p) {
  if (p == SweepParameter::mu) return k == OptimizerKind::momentum;
  if (p == SweepParameter::rho) return k == OptimizerKind::rmsprop;
  return true;
}

template <class Result>
SweepCell make_cell(OptimizerKind kind, double value, const std::vector<const Result*>& runs) {
  SweepCell cell;
  cell.kind = kind;
  cell.value = value;
  std::vector<double> objectives;
  for (const Result* r : runs) {
    ++cell.runs;
    if (r->status == RunStatus::numerical_instability) ++cell.unstable;
    if (r->status == RunStatus::stream_exhausted) ++cell.exhausted;
    if (r->status != RunStatus::completed) continue;
    ++cell.completed;
    if constexpr (std::is_same_v<Result, SupervisedRunResult>) {
      objectives.push_back(static_cast<double>(*r->total_steps()));
    } else {
      double auc = 0.0;
      for (double e : r->rmsve()) auc += e * e;
      objectives.push_back(auc);
    }
  }
  if (!objectives.empty()) {
    const Summary s = summarize(objectives);
    cell.objective = s.mean;
    cell.objective_se = s.stderr_;
  }
  return cell;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, std::optional<OptimizerKind> only) {
  SweepResult out;
  out.parameter = config.sweep.parameter;
  const std::vector<double> grid = config.sweep.grid();
  const std::vector<std::uint64_t> seeds = config.sweep.seeds.list();

  std::vector<OptimizerConfig> candidates;
  for (const auto& o : config.optimizers) {
    if (only && o.kind != *only) continue;
    if (!sweeps(o.kind, out.parameter)) continue;
    if (out.parameter != SweepParameter::alpha && std::isnan(o.alpha))
      throw ConfigError("sweeping " + to_string(out.parameter) + " needs a fixed alpha for " + to_string(o.kind));
    candidates.push_back(o);
  }
  if (candidates.empty()) throw ConfigError("no optimizer in the config takes part in this sweep");

  std::vector<RunJob> jobs;
  for (const auto& o : candidates)
    for (double v : grid)
      for (auto s : seeds) jobs.push_back({with_value(o, out.parameter, v), s});

  auto collect = [&](const auto& results) {
    using Result = std::decay_t<decltype(results.front())>;
    std::size_t k = 0;
    for (const auto& o : candidates) {
      std::vector<SweepCell> cells;
      for (double v : grid) {
        std::vector<const Result*> runs;
        for (std::size_t i = 0; i < seeds.size(); ++i) runs.push_back(&results[k++]);
        cells.push_back(make_cell(o.kind, v, runs));
      }
      out.table.insert(out.table.end(), cells.begin(), cells.end());
      out.best[o.kind] = select_best(cells).value;
    }
  };

  if (config.supervised()) {
    const SupervisedTestbed tb = make_supervised_testbed(config, FoldRole::sweep);
    collect(run_supervised_batch(tb, jobs, config.sweep.metrics));
  } else {
    const RlTestbed tb = make_rl_testbed(config);
    collect(run_rl_batch(tb, jobs, config.sweep.metrics));
  }
  return out;
}

std::string format_sweep_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "parameter,optimizer,value,runs,completed,exhausted,unstable,objective,objective_se,disqualified,selected\n";
  for (const auto& c : r.table) {
    const auto it = r.best.find(c.kind);
    const bool selected = it != r.best.end() && it->second == c.value;
    out << to_string(r.parameter) << ',' << to_string(c.kind) << ',' << format_number(c.value) << ',' << c.runs << ','
        << c.completed << ',' << c.exhausted << ',' << c.unstable << ','
        << (c.objective ? format_number(*c.objective) : "") << ',' << format_number(c.objective_se) << ','
        << (c.disqualified() ? 1 : 0) << ',' << (selected ? 1 : 0) << '\n';
  }
  return out.str();
}

nlohmann::json best_to_json(const SweepResult& r) {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [k, v] : r.best) values[to_string(k)] = v;
  j["parameter"] = to_string(r.parameter);
  j["best"] = values;
  return j;
}

void apply_best(ExperimentConfig& config, const nlohmann::json& doc, SweepParameter p) {
  if (!doc.is_object() || !doc.contains("best") || !doc.at("best").is_object())
    throw ConfigError("sweep result document lacks a 'best' object");
  if (doc.contains("parameter") && doc.at("parameter") != to_string(p))
    throw ConfigError("sweep result is for " + doc.at("parameter").dump() + ", not " + to_string(p));
  for (const auto& [name, value] : doc.at("best").items()) {
    const OptimizerKind kind = optimizer_kind_from_string(name);
    if (!value.is_number()) throw ConfigError("sweep value for " + name + " is not a number");
    for (auto& o : config.optimizers)
      if (o.kind == kind) o = with_value(o, p, value.get<double>());
  }
}

}  // namespace fb
