#pragma once

// Experiment configuration: a JSON document with one section per concern.
// Unknown keys are rejected. Missing keys take per-testbed, per-scale
// defaults, and the fully resolved document is what gets hashed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbench/nn.hpp"
#include "fbench/optimizer.hpp"

namespace fb {

enum class Testbed { mnist, fashion_mnist, mountain_car, acrobot };
enum class ScalePreset { desk, paper };
enum class DataSource { idx, synthetic };
enum class RunningAccuracy { cumulative, exponential };

std::string to_string(Testbed t);
Testbed testbed_from_string(const std::string& s);
bool is_supervised(Testbed t);

struct SeedRange {
  std::uint64_t first = 0;
  std::size_t count = 1;

  std::vector<std::uint64_t> list() const;
};

struct MasteryConfig {
  double threshold = 0.9;
  std::size_t streak = 5;
  RunningAccuracy running = RunningAccuracy::cumulative;
  double ema_decay = 0.9;  // exponential running accuracy only
};

struct DataConfig {
  DataSource source = DataSource::idx;
  std::string dir;  // IDX directory
  int fold_count = 10;
  std::uint64_t fold_seed = 0;
  std::array<int, 2> subtask_a{1, 2};
  std::array<int, 2> subtask_b{3, 4};
  std::array<int, 2> sweep_folds{0, 1};
  std::array<int, 2> eval_folds{2, 3};
  std::vector<int> probe_folds{4, 5, 6, 7, 8, 9};
  int retention_fold = 4;
  std::size_t probe_per_class = 10;
  std::size_t synth_per_class = 600;  // synthetic source only
  std::uint64_t synth_seed = 0;
  double synth_spread = 0.2;
};

struct RlConfig {
  std::size_t episodes = 100;
  std::size_t eval_transitions = 100'000;
  std::size_t eval_states = 500;
  std::uint64_t eval_seed = 0;
  bool eval_per_seed = false;
  std::string cache_dir;  // empty: no caching
  bool mc_literal_dynamics = false;
  std::size_t step_cap = 100'000;
  std::uint64_t probe_seed = 0;  // acrobot probe states
};

struct MetricConfig {
  std::size_t every = 1;            // steps (supervised) or episodes (RL); 0 disables
  std::vector<int> phases{1, 2, 3, 4};
  bool overlap = true;
  bool interference = true;
  bool verify_purity = false;
};

enum class SweepParameter { alpha, mu, rho };
std::string to_string(SweepParameter p);

struct SweepConfig {
  SweepParameter parameter = SweepParameter::alpha;
  // Explicit values win; otherwise 2^exp for exp = exp_start, exp_start -
  // exp_step, ... down to exp_stop.
  std::vector<double> values;
  double exp_start = -3.0;
  double exp_stop = -18.0;
  double exp_step = 1.0;
  SeedRange seeds{0, 50};
  bool metrics = false;  // overlap/interference during sweep runs

  std::vector<double> grid() const;
};

struct ExperimentConfig {
  Testbed testbed = Testbed::mnist;
  ScalePreset scale = ScalePreset::desk;
  NetworkSpec network = NetworkSpec::mnist();
  std::vector<OptimizerConfig> optimizers;
  SeedRange seeds{1000, 100};
  MasteryConfig mastery;
  DataConfig data;
  RlConfig rl;
  MetricConfig metrics;
  SweepConfig sweep;
  std::string output_dir = "results";

  bool supervised() const { return is_supervised(testbed); }
  void validate() const;  // throws ConfigError
};

// Defaults for a testbed at a scale, with all four optimizers.
ExperimentConfig default_config(Testbed testbed, ScalePreset scale = ScalePreset::desk);

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

// SHA-256 of the resolved configuration (hex).
std::string config_hash(const ExperimentConfig& config);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace fb
