#pragma once

// Experiment runs: the four-phase supervised mastery loop, the online TD(0)
// value-estimation loop, and parallel batches of either over seeds.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fbench/config.hpp"
#include "fbench/dataset.hpp"
#include "fbench/environment.hpp"
#include "fbench/metrics.hpp"
#include "fbench/optimizer.hpp"

namespace fb {

enum class RunStatus { completed, stream_exhausted, numerical_instability };
std::string to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& s);

struct MetricRecord {
  std::size_t index = 0;  // 1-based step (supervised) or episode (RL)
  int phase = 0;          // 1..4 supervised; 0 for RL
  std::optional<double> overlap;
  std::optional<double> interference;
  std::optional<double> rmsve;
  double loss = 0.0;  // online loss of the step, or mean TD loss of the episode
};

// Running accuracy within one phase and the consecutive-satisfaction count.
class MasteryTracker {
 public:
  explicit MasteryTracker(const MasteryConfig& config) : config_(config) {}

  // Feed one pre-update prediction outcome; true once the criterion holds.
  bool record(bool correct);
  void reset();

  std::size_t steps() const { return steps_; }
  std::size_t correct() const { return correct_; }
  std::size_t consecutive() const { return consecutive_; }
  double running_accuracy() const;

 private:
  MasteryConfig config_;
  std::size_t steps_ = 0;
  std::size_t correct_ = 0;
  std::size_t consecutive_ = 0;
  double ema_ = 0.0;
};

struct RunDiagnostics {
  std::size_t metric_calls = 0;
  std::size_t purity_violations = 0;  // only counted with metrics.verify_purity
  std::size_t unstable_pairs = 0;
};

struct SupervisedRunResult {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::completed;
  std::string message;
  std::array<std::optional<std::size_t>, 4> phase_lengths;
  std::optional<double> retention;
  std::optional<double> relearning;
  std::vector<MetricRecord> records;
  RunDiagnostics diagnostics;

  std::optional<std::size_t> total_steps() const;
};

struct RLRunResult {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::completed;
  std::string message;
  std::vector<std::size_t> episode_lengths;
  std::vector<MetricRecord> records;  // one per episode
  RunDiagnostics diagnostics;

  std::vector<double> rmsve() const;
};

enum class FoldRole { sweep, evaluation };

// Everything a supervised run reads and never writes; shared across seeds.
struct SupervisedTestbed {
  ExperimentConfig config;
  std::shared_ptr<const ImageDataset> data;
  FoldAssignment folds;
  PhaseSchedule schedule;
  LabeledBatch retention_set;        // subtask A examples of the retention fold
  std::vector<int> excluded_folds;   // folds the probe set must avoid
};

// Loads (or synthesizes) the dataset named by the config.
std::shared_ptr<const ImageDataset> load_dataset(const ExperimentConfig& config);

SupervisedTestbed make_supervised_testbed(const ExperimentConfig& config, FoldRole role,
                                          std::shared_ptr<const ImageDataset> data = nullptr);

// With `with_metrics` false no overlap/interference is computed regardless
// of the cadence (sweeps).
SupervisedRunResult run_supervised(const SupervisedTestbed& testbed, const OptimizerConfig& optimizer,
                                   std::uint64_t seed, bool with_metrics = true);

struct RlTestbed {
  ExperimentConfig config;
  std::shared_ptr<const EvalStateSet> eval;  // null when eval_per_seed
  TdProbeSet probe;
};

// Builds or loads the evaluation set. Cached under rl.cache_dir when set.
EvalStateSet rl_eval_set(const ExperimentConfig& config, std::uint64_t seed);
RlTestbed make_rl_testbed(const ExperimentConfig& config);

RLRunResult run_rl(const RlTestbed& testbed, const OptimizerConfig& optimizer, std::uint64_t seed,
                   bool with_metrics = true);

struct RunJob {
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

// Worker count: OpenMP's default, capped by FB_WORKERS when set.
int worker_count();

// Results come back in job order whatever the scheduling.
std::vector<SupervisedRunResult> run_supervised_batch(const SupervisedTestbed& testbed,
                                                      const std::vector<RunJob>& jobs, bool with_metrics = true);
std::vector<RLRunResult> run_rl_batch(const RlTestbed& testbed, const std::vector<RunJob>& jobs,
                                      bool with_metrics = true);

}  // namespace fb
