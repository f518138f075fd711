#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "fbench/aggregate.hpp"
#include "fbench/error.hpp"
#include "fbench/results.hpp"
#include "support.hpp"

using namespace fb;

namespace {

std::vector<ResultRow> random_rows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::bernoulli_distribution present(0.7);
  const char* opts[] = {"sgd", "momentum", "rmsprop", "adam"};
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    ResultRow r;
    r.testbed = i % 2 ? "mnist" : "acrobot";
    r.optimizer = opts[i % 4];
    r.alpha = std::ldexp(1.0, -static_cast<int>(3 + i % 16));
    if (r.optimizer == "momentum") r.mu = 0.9;
    if (r.optimizer == "rmsprop") r.rho = 0.999;
    r.seed = 1000 + i;
    r.status = i % 7 == 0 ? "stream_exhausted" : "completed";
    for (auto& p : r.phase_length)
      if (present(rng)) p = std::floor(std::abs(u(rng)));
    auto maybe = [&](std::optional<double>& f) {
      if (present(rng)) f = u(rng) / 3.0;
    };
    maybe(r.retention);
    maybe(r.relearning);
    maybe(r.overlap_final);
    maybe(r.overlap_mean);
    maybe(r.overlap_last_phase);
    maybe(r.interference_final);
    maybe(r.interference_mean);
    maybe(r.interference_last_phase);
    maybe(r.rmsve_final);
    maybe(r.rmsve_mean);
    maybe(r.rmsve_auc);
    maybe(r.episodes);
    r.unstable_pairs = i % 3;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("numbers round trip exactly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(i % 40) - 20);
    CHECK(parse_number(format_number(v)) == v);
  }
  CHECK(format_number(0.0625) == "0.0625");
  CHECK(parse_number(format_number(std::numeric_limits<double>::denorm_min())) ==
        std::numeric_limits<double>::denorm_min());
  CHECK_THROWS_AS(parse_number("1.5x"), FormatError);
  CHECK_THROWS_AS(parse_number(""), FormatError);
}

TEST_CASE("csv round trip of 40 rows") {
  const auto rows = random_rows(40, 2);
  const std::string text = format_csv(rows);
  const auto back = parse_csv(text);
  REQUIRE(back.size() == 40);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back[i] == rows[i]);
  CHECK(format_csv(back) == text);

  // Header is fixed and ordered.
  std::string header;
  for (std::size_t i = 0; i < result_columns().size(); ++i) header += (i ? "," : "") + result_columns()[i];
  CHECK(text.substr(0, text.find('\n')) == header);
}

TEST_CASE("missing values are empty fields") {
  ResultRow r;
  r.testbed = "mnist";
  r.optimizer = "sgd";
  r.alpha = 0.5;
  r.status = "stream_exhausted";
  r.phase_length[0] = 12.0;
  const std::string text = format_csv({r});
  const std::string line = text.substr(text.find('\n') + 1);
  CHECK(line == "mnist,sgd,0.5,,,0,stream_exhausted,12,,,,,,,,,,,,,,,,0\n");
}

TEST_CASE("malformed csv is reported with an offset") {
  const std::string good = format_csv(random_rows(2, 3));
  CHECK_THROWS_AS(parse_csv("testbed,optimizer\n"), FormatError);
  std::string bad = good;
  bad.insert(bad.find('\n') + 1, "x,");
  try {
    parse_csv(bad);
    FAIL("accepted a row with too many fields");
  } catch (const FormatError& e) {
    CHECK(e.offset() > good.find('\n'));
  }
}

TEST_CASE("report output survives a write/read round trip") {
  auto rows = random_rows(40, 4);
  for (auto& r : rows) {
    r.testbed = "mnist";
    r.mu.reset();
    r.rho.reset();
    r.alpha = r.optimizer == "sgd" ? 0.0625 : 0.001;
    if (r.optimizer == "momentum") r.mu = 0.9;
    if (r.optimizer == "rmsprop") r.rho = 0.999;
  }
  fbtest::TempDir dir;
  RunManifest m;
  m.config_hash = "abc";
  write_results(dir.path(), rows, "", m);
  const auto back = read_results(dir.path());
  CHECK(render_table4(back) == render_table4(rows));
  CHECK(render_table7(back) == render_table7(rows));
}

TEST_CASE("rows from runs") {
  OptimizerConfig o;
  o.kind = OptimizerKind::momentum;
  o.alpha = 0.25;
  SupervisedRunResult s;
  s.seed = 5;
  s.phase_lengths = {10, 20, 5, 8};
  s.retention = 0.5;
  s.relearning = 2.0;
  s.records = {{1, 1, 0.2, 0.1, {}, 0.0}, {40, 4, 0.4, 0.3, {}, 0.0}, {42, 4, 0.6, 0.5, {}, 0.0}};
  const ResultRow r = make_row(Testbed::mnist, o, s);
  CHECK(r.mu == 0.9);
  CHECK_FALSE(r.rho.has_value());
  CHECK(r.phase_length[1] == 20.0);
  CHECK(*r.overlap_final == 0.6);
  CHECK(*r.overlap_last_phase == doctest::Approx(0.5));
  CHECK(*r.interference_mean == doctest::Approx(0.3));
  CHECK(r.metric("phase3") == 5.0);
  CHECK_FALSE(r.metric("rmsve_final").has_value());
  CHECK(run_id(Testbed::mnist, o, 5) == "mnist/momentum/alpha=0.25/mu=0.90000000000000002/seed=5");

  RLRunResult rl;
  rl.records = {{1, 0, {}, {}, 3.0, 0.0}, {2, 0, {}, {}, 4.0, 0.0}};
  const ResultRow q = make_row(Testbed::acrobot, o, rl);
  CHECK(*q.rmsve_auc == 25.0);
  CHECK(*q.rmsve_mean == 3.5);
  CHECK(*q.episodes == 2.0);
}

TEST_CASE("metric log lines") {
  std::vector<MetricRecord> recs{{3, 4, 0.5, std::nullopt, std::nullopt, 1.25}};
  const std::string log = format_metric_log("mnist/sgd/alpha=0.5/seed=1", recs);
  const auto j = nlohmann::json::parse(log);
  CHECK(j.at("run_id") == "mnist/sgd/alpha=0.5/seed=1");
  CHECK(j.at("index") == 3);
  CHECK(j.at("phase") == 4);
  CHECK(j.at("overlap") == 0.5);
  CHECK(j.at("interference").is_null());
  CHECK(j.at("loss") == 1.25);
  CHECK(std::count(log.begin(), log.end(), '\n') == 1);
}

TEST_CASE("manifest contents") {
  RunManifest m;
  m.config_hash = "h";
  m.seeds = {1, 2};
  m.dataset_checksums["train-labels-idx1-ubyte.gz"] = "ff";
  const auto j = m.to_json();
  CHECK(j.at("version") == kArtifactVersion);
  CHECK(j.at("seeds").size() == 2);
  CHECK(j.at("dataset_checksums").at("train-labels-idx1-ubyte.gz") == "ff");
  const std::string ts = utc_timestamp();
  CHECK(ts.size() == 20);
  CHECK(ts.back() == 'Z');
}
