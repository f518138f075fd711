#include <cmath>

#include <doctest.h>

#include "fbench/aggregate.hpp"
#include "fbench/error.hpp"
#include "fbench/sweep.hpp"

using namespace fb;

namespace {

Summary summary(double mean, double se) {
  Summary s;
  s.mean = mean;
  s.stderr_ = se;
  s.n = 10;
  return s;
}

ResultRow row(const std::string& opt, std::uint64_t seed, double retention, double relearning,
              const std::string& status = "completed") {
  ResultRow r;
  r.testbed = "mnist";
  r.optimizer = opt;
  r.alpha = 0.01;
  r.seed = seed;
  r.status = status;
  r.retention = retention;
  r.relearning = relearning;
  r.overlap_last_phase = 0.1;
  r.interference_last_phase = 0.2;
  return r;
}

}  // namespace

TEST_CASE("mean and standard error") {
  const std::vector<double> v{1.0, 2.0, 3.0};
  const Summary s = summarize(v);
  CHECK(s.mean == 2.0);
  CHECK(s.stderr_ == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(s.stderr_ == doctest::Approx(0.5774).epsilon(1e-4));
  CHECK(s.n == 3);

  const std::vector<double> one{4.0};
  CHECK(summarize(one).stderr_ == 0.0);
  CHECK(summarize(one).n == 1);

  const std::vector<std::optional<double>> gaps{1.0, std::nullopt, 3.0};
  const Summary g = summarize(gaps);
  CHECK(g.mean == 2.0);
  CHECK(g.n == 2);
  CHECK(g.excluded == 1);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), UsageError);
}

TEST_CASE("aggregate groups by testbed, optimizer, alpha and metric") {
  std::vector<ResultRow> rows{row("sgd", 1, 0.5, 2.0), row("sgd", 2, 0.7, 2.2), row("adam", 1, 0.1, 0.5),
                              row("adam", 2, 0.0, 0.0, "stream_exhausted")};
  rows[3].retention.reset();
  rows.push_back(row("sgd", 3, 0.6, 1.0));
  rows.back().alpha = 0.02;
  const std::vector<std::string> metrics{"retention", "relearning"};
  const auto out = aggregate(rows, metrics);
  REQUIRE(out.size() == 6);
  // Key order: optimizer, then alpha, then metric.
  CHECK(out[0].key.optimizer == "adam");
  CHECK(out[0].key.metric == "relearning");
  CHECK(out[0].summary.n == 1);
  CHECK(out[0].summary.excluded == 1);  // the exhausted run
  CHECK(out[3].key.optimizer == "sgd");
  CHECK(out[3].key.alpha == 0.01);
  CHECK(out[3].key.metric == "retention");
  CHECK(out[3].summary.mean == doctest::Approx(0.6));
  CHECK(out[5].key.alpha == 0.02);

  std::vector<GroupKey> empty;
  const std::vector<std::string> missing{"rmsve_final"};
  CHECK(aggregate(rows, missing, &empty).empty());
  CHECK(empty.size() == 3);
}

TEST_CASE("ranking with separated and tied means") {
  std::map<OptimizerKind, Summary> s{{OptimizerKind::sgd, summary(2.0, 0.05)},
                                     {OptimizerKind::rmsprop, summary(1.5, 0.05)},
                                     {OptimizerKind::momentum, summary(1.0, 0.05)},
                                     {OptimizerKind::adam, summary(0.6, 0.05)}};
  auto r = rank_optimizers(s, Direction::higher_is_better);
  CHECK(r.label(OptimizerKind::sgd) == "1");
  CHECK(r.label(OptimizerKind::rmsprop) == "2");
  CHECK(r.label(OptimizerKind::momentum) == "3");
  CHECK(r.label(OptimizerKind::adam) == "4");
  CHECK_FALSE(r.partial);

  r = rank_optimizers(s, Direction::lower_is_better);
  CHECK(r.label(OptimizerKind::adam) == "1");

  // Momentum and Adam within one pooled standard error of each other.
  s[OptimizerKind::adam] = summary(0.95, 0.05);
  r = rank_optimizers(s, Direction::higher_is_better);
  CHECK(r.label(OptimizerKind::momentum) == "=3");
  CHECK(r.label(OptimizerKind::adam) == "=3");
  CHECK(r.label(OptimizerKind::sgd) == "1");

  for (auto& [k, v] : s) v = summary(1.0, 0.0);
  r = rank_optimizers(s, Direction::higher_is_better);
  for (const auto& e : r.entries) CHECK(e.label() == "=1");

  s.erase(OptimizerKind::adam);
  CHECK(rank_optimizers(s, Direction::higher_is_better).partial);
}

TEST_CASE("retention ranking is not meaningful when everything forgets") {
  std::vector<ResultRow> rows;
  for (std::string opt : {"sgd", "momentum", "rmsprop", "adam"})
    for (std::uint64_t seed = 0; seed < 3; ++seed) rows.push_back(row(opt, seed, 0.001 * static_cast<double>(seed), 1.0));
  for (auto& r : rows) r.testbed = "fashion_mnist";
  const auto ranks = rankings_for(rows, "fashion_mnist");
  CHECK_FALSE(ranks.at("Retention").meaningful);
  CHECK(ranks.at("Retention").label(OptimizerKind::sgd) == "-");
  CHECK(ranks.at("Relearning").meaningful);

  const std::string table = render_table7(rows);
  CHECK(table.find("Retention\tfashion_mnist\t-\t-\t-\t-") != std::string::npos);
  CHECK(table.find("Relearning\tfashion_mnist\t=1\t=1\t=1\t=1") != std::string::npos);

  rows.push_back(row("sgd", 9, 0.5, 1.0));
  rows.back().testbed = "fashion_mnist";
  rows.back().alpha = 0.5;
  CHECK_THROWS_AS(rankings_for(rows, "fashion_mnist"), UsageError);
}

TEST_CASE("table4 style reports completed counts and mean+-se") {
  std::vector<ResultRow> rows{row("sgd", 1, 0.5, 2.0), row("sgd", 2, 0.7, 2.0),
                              row("sgd", 3, 0.0, 0.0, "stream_exhausted")};
  for (auto& r : rows) r.phase_length = {10.0, 20.0, 5.0, 4.0};
  rows[2].phase_length = {10.0, std::nullopt, std::nullopt, std::nullopt};
  const std::string t = render_table4(rows);
  CHECK(t.find("# mnist") != std::string::npos);
  CHECK(t.find("sgd\t0.01\t2/3\t10+-0\t20+-0") != std::string::npos);
  CHECK(t.find("0.6+-0.1") != std::string::npos);
}

TEST_CASE("sweep selection") {
  SweepCell only;
  only.value = 0.25;
  only.objective = 3.0;
  const SweepCell single[] = {only};
  CHECK(select_best(single).value == 0.25);

  std::vector<SweepCell> cells(3);
  cells[0].value = 0.5;
  cells[0].objective = 1.0;
  cells[0].unstable = 1;  // disqualified despite the lowest objective
  cells[1].value = 0.25;
  cells[1].objective = 2.0;
  cells[2].value = 0.125;
  cells[2].objective = 2.0;
  CHECK(select_best(cells).value == 0.25);  // tie goes to the larger value

  cells[1].unstable = 1;
  cells[2].objective.reset();
  CHECK_THROWS_AS(select_best(cells), SweepFailed);
}

TEST_CASE("sweep selection on a quadratic bowl matches exhaustive search") {
  // SGD on f(t) = 10 t^2 from t = 1 for 20 steps; objective: sum of f along the way.
  const auto grid = default_config(Testbed::mnist).sweep.grid();
  auto objective = [](double alpha) {
    double t = 1.0, total = 0.0;
    for (int i = 0; i < 20; ++i) {
      t -= alpha * 20.0 * t;
      total += 10.0 * t * t;
    }
    return total;
  };
  std::vector<SweepCell> cells;
  double best_value = 0.0, best_objective = INFINITY;
  for (double a : grid) {
    SweepCell c;
    c.value = a;
    c.objective = objective(a);
    cells.push_back(c);
    if (*c.objective < best_objective) {
      best_objective = *c.objective;
      best_value = a;
    }
  }
  CHECK(select_best(cells).value == best_value);
  CHECK(best_value == 0.0625);
}

TEST_CASE("best values feed back into a config") {
  auto cfg = default_config(Testbed::mnist);
  const nlohmann::json best{{"parameter", "alpha"}, {"best", {{"sgd", 0.0625}, {"adam", 0.001}}}};
  apply_best(cfg, best);
  for (const auto& o : cfg.optimizers) {
    if (o.kind == OptimizerKind::sgd) CHECK(o.alpha == 0.0625);
    if (o.kind == OptimizerKind::adam) CHECK(o.alpha == 0.001);
    if (o.kind == OptimizerKind::momentum) CHECK(std::isnan(o.alpha));
  }
  CHECK_THROWS_AS(apply_best(cfg, best, SweepParameter::mu), ConfigError);
  CHECK_THROWS_AS(apply_best(cfg, nlohmann::json{{"best", 3}}), ConfigError);
  CHECK(with_value(OptimizerConfig{}, SweepParameter::rho, 0.99).rho == 0.99);
}
