#pragma once

// Deterministic classic-control simulators with the fixed policies used for
// value estimation, plus rollout-based ground truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbench/error.hpp"
#include "fbench/random.hpp"

namespace fb {

enum class EnvId { mountain_car, acrobot };

std::string to_string(EnvId id);
EnvId env_id_from_string(const std::string& name);

inline constexpr std::size_t kDefaultStepCap = 100'000;

template <class State>
struct StepResult {
  State next;
  double reward = -1.0;
  bool terminal = false;
};

struct MountainCarState {
  double position = 0.0;
  double velocity = 0.0;
  bool operator==(const MountainCarState&) const = default;
};

class MountainCar {
 public:
  using State = MountainCarState;
  static constexpr EnvId id = EnvId::mountain_car;
  static constexpr int action_count = 3;
  static constexpr std::size_t observation_size = 2;
  static constexpr double min_position = -1.2;
  static constexpr double max_position = 0.6;
  static constexpr double max_speed = 0.07;
  static constexpr double goal_position = 0.5;

  // `literal_dynamics` uses 0.001 * a for the thrust term instead of
  // 0.001 * (a - 1).
  explicit MountainCar(bool literal_dynamics = false) : literal_(literal_dynamics) {}

  State reset(Rng& rng) const;
  StepResult<State> step(const State& s, int action) const;  // throws UsageError
  static int policy(const State& s);
  static bool is_terminal(const State& s) { return s.position >= goal_position; }
  static Eigen::VectorXd observe(const State& s);
  bool literal_dynamics() const { return literal_; }

 private:
  bool literal_;
};

struct AcrobotState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double dtheta1 = 0.0;
  double dtheta2 = 0.0;
  bool operator==(const AcrobotState&) const = default;
};

class Acrobot {
 public:
  using State = AcrobotState;
  static constexpr EnvId id = EnvId::acrobot;
  static constexpr int action_count = 3;  // torque -1, 0, +1
  static constexpr std::size_t observation_size = 6;
  static constexpr double dt = 0.2;
  static constexpr double link_length = 1.0;
  static constexpr double link_mass = 1.0;
  static constexpr double link_com = 0.5;
  static constexpr double link_moi = 1.0;
  static constexpr double gravity = 9.8;
  static constexpr double pi = 3.14159265358979323846;
  static constexpr double max_vel_1 = 4.0 * pi;
  static constexpr double max_vel_2 = 9.0 * pi;

  State reset(Rng& rng) const;
  StepResult<State> step(const State& s, int action) const;  // throws UsageError
  static int policy(const State& s);
  static bool is_terminal(const State& s);
  static Eigen::VectorXd observe(const State& s);

  // Time derivative of (theta1, theta2, dtheta1, dtheta2) under `torque`.
  static std::array<double, 4> derivatives(const std::array<double, 4>& s, double torque);
};

struct EpisodeStats {
  std::size_t episodes = 0;
  double mean_length = 0.0;
  double std_length = 0.0;
  std::size_t min_length = 0;
  std::size_t max_length = 0;
};

// Steps until termination under the fixed policy; 0 for a state that already
// satisfies the termination test. Throws NonTerminatingPolicy past `cap`.
template <class Env>
std::size_t steps_to_termination(const Env& env, typename Env::State s,
                                 std::size_t cap = kDefaultStepCap) {
  if (Env::is_terminal(s)) return 0;
  std::size_t steps = 0;
  for (;;) {
    const auto r = env.step(s, Env::policy(s));
    ++steps;
    if (r.terminal) return steps;
    if (steps >= cap)
      throw NonTerminatingPolicy(to_string(Env::id) + " rollout exceeded " + std::to_string(cap) + " steps");
    s = r.next;
  }
}

// Undiscounted value under the fixed policy (reward -1 per step).
template <class Env>
double true_value(const Env& env, const typename Env::State& s, std::size_t cap = kDefaultStepCap) {
  return -static_cast<double>(steps_to_termination(env, s, cap));
}

template <class Env>
EpisodeStats episode_statistics(const Env& env, std::size_t episodes, std::uint64_t seed,
                                std::size_t cap = kDefaultStepCap) {
  Rng rng = make_rng(seed, Stream::env_reset);
  EpisodeStats stats;
  stats.episodes = episodes;
  stats.min_length = static_cast<std::size_t>(-1);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const std::size_t len = steps_to_termination(env, env.reset(rng), cap);
    sum += static_cast<double>(len);
    sum_sq += static_cast<double>(len) * static_cast<double>(len);
    stats.min_length = std::min(stats.min_length, len);
    stats.max_length = std::max(stats.max_length, len);
  }
  const double n = static_cast<double>(episodes);
  stats.mean_length = sum / n;
  stats.std_length = episodes > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * stats.mean_length * stats.mean_length) / (n - 1.0))) : 0.0;
  return stats;
}

// States weighted by on-policy visitation, with ground-truth values.
struct EvalStateSet {
  Eigen::MatrixXd observations;  // (observation_size x count), network inputs
  Eigen::VectorXd weights;       // sums to 1
  Eigen::VectorXd true_values;   // <= 0

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
};

// Runs whole episodes from resets until at least n_transitions transitions
// exist, then draws n_states of the visited (pre-transition) states uniformly
// with replacement and attaches their true values.
template <class Env>
EvalStateSet sample_eval_states(const Env& env, std::size_t n_transitions, std::size_t n_states,
                                std::uint64_t seed, std::size_t cap = kDefaultStepCap) {
  if (n_transitions == 0 || n_states == 0) throw ConfigError("evaluation set sizes must be positive");

  // Pass 1 measures the trajectory; pass 2 replays it and keeps only the
  // drawn states, so memory stays proportional to n_states.
  std::size_t total = 0;
  {
    Rng rng = make_rng(seed, Stream::eval_states);
    while (total < n_transitions) total += steps_to_termination(env, env.reset(rng), cap);
  }
  Rng pick_rng = make_rng(seed, Stream::eval_pick);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::vector<std::pair<std::size_t, std::size_t>> draws;  // (trajectory index, slot)
  draws.reserve(n_states);
  for (std::size_t i = 0; i < n_states; ++i) draws.emplace_back(pick(pick_rng), i);
  std::sort(draws.begin(), draws.end());

  EvalStateSet out;
  out.observations.resize(static_cast<Eigen::Index>(Env::observation_size), static_cast<Eigen::Index>(n_states));
  out.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_states), 1.0 / static_cast<double>(n_states));
  out.true_values.resize(static_cast<Eigen::Index>(n_states));

  Rng rng = make_rng(seed, Stream::eval_states);
  std::size_t t = 0;
  std::size_t next = 0;
  while (next < draws.size()) {
    auto s = env.reset(rng);
    for (;;) {
      while (next < draws.size() && draws[next].first == t) {
        const auto slot = static_cast<Eigen::Index>(draws[next].second);
        out.observations.col(slot) = Env::observe(s);
        out.true_values(slot) = true_value(env, s, cap);
        ++next;
      }
      const auto r = env.step(s, Env::policy(s));
      ++t;
      if (r.terminal) break;
      s = r.next;
    }
  }
  return out;
}

// Fixed probe states for overlap and interference: the 6x6 cell-centre grid
// over position [-1.2, 0.5] x velocity [-0.07, 0.07] (position-major).
std::vector<MountainCarState> mountain_car_probe_states();
// 180 states, angles uniform in [-pi, pi], velocities uniform within bounds.
std::vector<AcrobotState> acrobot_probe_states(std::uint64_t master_seed = 0);

// Versioned text cache for evaluation sets.
struct EvalCacheKey {
  EnvId env = EnvId::mountain_car;
  std::uint64_t seed = 0;
  std::size_t n_transitions = 0;
  std::size_t n_states = 0;
  bool literal_dynamics = false;
};
void save_eval_cache(const std::filesystem::path& path, const EvalCacheKey& key, const EvalStateSet& set);
// nullopt when the file is absent or was written for a different key.
std::optional<EvalStateSet> load_eval_cache(const std::filesystem::path& path, const EvalCacheKey& key);
std::string eval_cache_file_name(const EvalCacheKey& key);

}  // namespace fb
