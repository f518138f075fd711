#include <cmath>
#include <fstream>
#include <string>

#include <doctest.h>

#include "fbench/config.hpp"
#include "fbench/error.hpp"
#include "support.hpp"

using namespace fb;
using nlohmann::json;

namespace {

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("unknown keys are rejected by name") {
  CHECK(config_error({{"data", {{"folds", 10}}}}).find("'data.folds'") != std::string::npos);
  CHECK(config_error({{"bogus", 1}}).find("'bogus'") != std::string::npos);
  CHECK(config_error({{"optimizers", {{{"kind", "sgd"}, {"lr", 0.1}}}}}).find("'optimizers[0].lr'") !=
        std::string::npos);
  CHECK(config_error({{"mastery", {{"threshold", "high"}}}}).find("mastery.threshold") != std::string::npos);
  CHECK(config_error({{"experiment", {{"testbed", "cartpole"}}}}) != "");
}

TEST_CASE("validation of ranges") {
  CHECK(config_error({{"mastery", {{"threshold", 1.5}}}}) != "");
  CHECK(config_error({{"mastery", {{"streak", 0}}}}) != "");
  CHECK(config_error({{"rl", {{"episodes", 0}}}}) != "");
  CHECK(config_error({{"data", {{"subtask_b", {1, 5}}}}}) != "");
  CHECK(config_error({{"data", {{"retention_fold", 2}}}}) != "");
  CHECK(config_error({{"optimizers", {{{"kind", "sgd"}}, {{"kind", "sgd"}}}}}) != "");
  CHECK(config_error({{"optimizers", {{{"kind", "adam"}, {"beta1", 1.0}}}}}) != "");
  CHECK(config_error({{"network", {{"layers", {784, 4}}}}}) != "");
}

TEST_CASE("defaults per testbed and scale") {
  const auto mnist = default_config(Testbed::mnist);
  CHECK(mnist.optimizers.size() == 4);
  CHECK(std::isnan(mnist.optimizers[0].alpha));
  CHECK(mnist.mastery.threshold == 0.9);
  CHECK(mnist.mastery.streak == 5);
  CHECK(mnist.network.layer_sizes == std::vector<std::size_t>{784, 100, 4});
  CHECK(mnist.seeds.count == 100);
  CHECK(default_config(Testbed::mnist, ScalePreset::paper).seeds.count == 500);

  const auto fashion = default_config(Testbed::fashion_mnist);
  CHECK(fashion.data.subtask_a == std::array<int, 2>{1, 2});
  CHECK(fashion.data.subtask_b == std::array<int, 2>{3, 4});

  const auto mc = default_config(Testbed::mountain_car);
  CHECK(mc.rl.episodes == 100);
  CHECK(default_config(Testbed::acrobot, ScalePreset::paper).rl.episodes == 500);
  CHECK(mc.network.layer_sizes == std::vector<std::size_t>{2, 50, 1});
  CHECK(default_config(Testbed::acrobot).network.layer_sizes == std::vector<std::size_t>{6, 32, 256, 1});
}

TEST_CASE("sweep grids") {
  const auto supervised = default_config(Testbed::mnist).sweep.grid();
  REQUIRE(supervised.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) CHECK(supervised[i] == std::ldexp(1.0, -3 - static_cast<int>(i)));

  const auto rl = default_config(Testbed::acrobot).sweep.grid();
  REQUIRE(rl.size() == 31);
  CHECK(rl.front() == 0.125);
  CHECK(rl[1] == doctest::Approx(std::pow(2.0, -3.5)).epsilon(1e-15));
  CHECK(rl.back() == std::ldexp(1.0, -18));

  SweepConfig explicit_values;
  explicit_values.values = {0.3};
  CHECK(explicit_values.grid() == std::vector<double>{0.3});
}

TEST_CASE("resolved config round trips and hashes stably") {
  auto c = fbtest::synthetic_mnist();
  const ExperimentConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 64);

  const auto unset = default_config(Testbed::acrobot);
  CHECK(config_hash(parse_config(to_json(unset))) == config_hash(unset));
}

TEST_CASE("hash changes with every semantic field and only those") {
  const auto base = fbtest::synthetic_mnist();
  const std::string h = config_hash(base);

  auto moved = base;
  moved.output_dir = "elsewhere";
  CHECK(config_hash(moved) == h);

  auto changed = base;
  changed.optimizers[1].alpha *= 2.0;
  CHECK(config_hash(changed) != h);
  changed = base;
  changed.mastery.threshold = 0.95;
  CHECK(config_hash(changed) != h);
  changed = base;
  changed.data.fold_seed = 1;
  CHECK(config_hash(changed) != h);
  changed = base;
  changed.metrics.every = 1;
  CHECK(config_hash(changed) != h);
  changed = base;
  changed.seeds.first += 1;
  CHECK(config_hash(changed) != h);
}

TEST_CASE("config files accept comments") {
  fbtest::TempDir dir;
  const auto path = dir / "c.json";
  {
    std::ofstream out(path);
    out << "{\n  // desk run\n  \"experiment\": {\"testbed\": \"mountain_car\"},\n"
           "  \"rl\": {\"episodes\": 7}\n}\n";
  }
  const auto c = load_config(path);
  CHECK(c.testbed == Testbed::mountain_car);
  CHECK(c.rl.episodes == 7);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
}

TEST_CASE("sha256 of a known string") {
  const std::string abc = "abc";
  const std::vector<std::uint8_t> bytes(abc.begin(), abc.end());
  CHECK(sha256_hex(bytes) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
