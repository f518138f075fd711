#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <vector>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "fbench/config.hpp"

namespace fbtest {

// Removed with everything under it on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fbench-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small synthetic MNIST-shaped setup that runs in well under a second per seed.
inline fb::ExperimentConfig synthetic_mnist(std::size_t per_class = 600) {
  fb::ExperimentConfig c = fb::default_config(fb::Testbed::mnist);
  c.data.source = fb::DataSource::synthetic;
  c.data.synth_per_class = per_class;
  c.data.probe_per_class = 3;
  for (auto& o : c.optimizers) o.alpha = o.kind == fb::OptimizerKind::sgd || o.kind == fb::OptimizerKind::momentum ? 0.01 : 0.001;
  c.seeds = {1, 3};
  c.metrics.phases = {4};
  c.metrics.every = 3;
  return c;
}

inline fb::ExperimentConfig small_mountain_car(std::size_t episodes = 5) {
  fb::ExperimentConfig c = fb::default_config(fb::Testbed::mountain_car);
  c.rl.episodes = episodes;
  c.rl.eval_transitions = 2000;
  c.rl.eval_states = 50;
  for (auto& o : c.optimizers) o.alpha = 0.001;
  c.seeds = {1, 2};
  return c;
}

}  // namespace fbtest

namespace fbtest {

// Per-fold digit counts of the stratified MNIST training split, [fold][digit].
inline constexpr std::size_t kMnistFolds[10][10] = {
    {593, 675, 596, 614, 585, 543, 592, 627, 586, 595}, {593, 675, 596, 613, 585, 542, 592, 627, 585, 595},
    {593, 674, 596, 613, 584, 542, 592, 627, 585, 595}, {592, 674, 596, 613, 584, 542, 592, 627, 585, 595},
    {592, 674, 596, 613, 584, 542, 592, 627, 585, 595}, {592, 674, 596, 613, 584, 542, 592, 626, 585, 595},
    {592, 674, 596, 613, 584, 542, 592, 626, 585, 595}, {592, 674, 596, 613, 584, 542, 592, 626, 585, 595},
    {592, 674, 595, 613, 584, 542, 591, 626, 585, 595}, {592, 674, 595, 613, 584, 542, 591, 626, 585, 594},
};

// Labels with the given class totals, interleaved in a fixed pseudo-random order.
inline std::vector<std::uint8_t> labels_with_totals(const std::vector<std::size_t>& totals, std::uint64_t seed) {
  std::vector<std::uint8_t> out;
  for (std::size_t c = 0; c < totals.size(); ++c) out.insert(out.end(), totals[c], static_cast<std::uint8_t>(c));
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace fbtest
