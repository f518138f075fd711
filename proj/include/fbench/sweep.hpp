#pragma once

// Grid sweeps over one optimizer hyperparameter (alpha, mu or rho).

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbench/config.hpp"
#include "fbench/optimizer.hpp"

namespace fb {

struct SweepCell {
  OptimizerKind kind = OptimizerKind::sgd;
  double value = 0.0;
  std::size_t runs = 0;
  std::size_t completed = 0;
  std::size_t exhausted = 0;
  std::size_t unstable = 0;
  std::optional<double> objective;  // mean over completed runs; lower is better
  double objective_se = 0.0;

  // Any unstable run, or nothing completed.
  bool disqualified() const { return unstable > 0 || !objective; }
};

// Lowest objective among qualified cells, ties going to the larger value.
// Throws SweepFailed when every cell is disqualified.
const SweepCell& select_best(std::span<const SweepCell> cells);

struct SweepResult {
  SweepParameter parameter = SweepParameter::alpha;
  std::vector<SweepCell> table;
  std::map<OptimizerKind, double> best;
};

// Copy of `o` with the swept hyperparameter set to `value`.
OptimizerConfig with_value(OptimizerConfig o, SweepParameter p, double value);

// Runs every (optimizer, candidate, sweep seed) on the hyperparameter-selection
// folds (supervised) or the environment (RL). Supervised objective: total
// steps over the four phases. RL objective: sum over episodes of RMSVE^2.
// mu sweeps only momentum, rho only rmsprop.
SweepResult run_sweep(const ExperimentConfig& config, std::optional<OptimizerKind> only = std::nullopt);

// Sweep table as CSV; best values as {"sgd": 0.0625, ...}.
std::string format_sweep_csv(const SweepResult& result);
nlohmann::json best_to_json(const SweepResult& result);

// Sets each optimizer's swept value from a best-values document; optimizers
// it does not mention keep their value.
void apply_best(ExperimentConfig& config, const nlohmann::json& best, SweepParameter p = SweepParameter::alpha);

}  // namespace fb
