#include "fbench/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fbench/aggregate.hpp"
#include "fbench/dataset.hpp"
#include "fbench/error.hpp"
#include "fbench/results.hpp"
#include "fbench/runner.hpp"
#include "fbench/sweep.hpp"

namespace fb {

SeedRange parse_seed_range(const std::string& text) {
  auto number = [&](const std::string& s) -> std::uint64_t {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || s[0] == '-') throw UsageError("invalid seed range '" + text + "'");
    return v;
  };
  const auto dots = text.find("..");
  if (dots == std::string::npos) return {number(text), 1};
  const std::uint64_t a = number(text.substr(0, dots));
  const std::uint64_t b = number(text.substr(dots + 2));
  if (b < a) throw UsageError("seed range '" + text + "' runs backwards");
  return {a, static_cast<std::size_t>(b - a + 1)};
}

namespace {

constexpr const char* kRetrieval =
    "fbench does not download data. Place the training files (train-images-idx3-ubyte.gz and\n"
    "train-labels-idx1-ubyte.gz) from the dataset's official distribution in the directory\n"
    "and run ingest again.";

void require_alphas(const ExperimentConfig& config) {
  for (const auto& o : config.optimizers)
    if (std::isnan(o.alpha))
      throw ConfigError("no alpha for " + to_string(o.kind) +
                        "; set optimizers[].alpha in the config or pass --alpha-from <best.json>");
}

void keep_only(ExperimentConfig& config, const std::string& name) {
  if (name.empty()) return;
  const OptimizerKind kind = optimizer_kind_from_string(name);
  std::erase_if(config.optimizers, [&](const OptimizerConfig& o) { return o.kind != kind; });
  if (config.optimizers.empty()) throw ConfigError("optimizer " + name + " is not in the config");
}

int cmd_ingest(const std::string& dataset, const std::string& dir, std::string out_path, std::ostream& out) {
  const Testbed tb = testbed_from_string(dataset);
  if (!is_supervised(tb)) throw UsageError("ingest takes mnist or fashion_mnist");
  IdxFiles files;
  try {
    files = locate_training_files(dir);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + "\n" + kRetrieval);
  }
  const ImageDataset data = load_training_set(dir);
  if (data.rows() != 28 || data.cols() != 28)
    throw FormatError("expected 28x28 images, found " + std::to_string(data.rows()) + "x" + std::to_string(data.cols()), 0);
  std::array<std::size_t, 10> counts{};
  for (auto l : data.labels()) {
    if (l > 9) throw FormatError("label " + std::to_string(l) + " outside 0..9", 0);
    ++counts[l];
  }
  ExperimentConfig cfg = default_config(tb);
  cfg.data.dir = dir;
  const auto sums = dataset_checksums(cfg);
  nlohmann::json doc{{"dataset", dataset}, {"examples", data.size()}, {"class_counts", counts}, {"sha256", sums}};
  if (out_path.empty()) out_path = (std::filesystem::path(dir) / "fbench-checksums.json").string();
  write_text_file(out_path, doc.dump(2) + "\n");
  out << dataset << ": " << data.size() << " examples\n";
  for (const auto& [name, sum] : sums) out << "  " << name << "  " << sum << "\n";
  out << "checksums written to " << out_path << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& optimizer, const std::string& seeds,
              std::string out_dir, std::ostream& out) {
  ExperimentConfig config = load_config(config_path);
  if (!seeds.empty()) config.sweep.seeds = parse_seed_range(seeds);
  const auto only = optimizer.empty() ? std::nullopt : std::optional(optimizer_kind_from_string(optimizer));
  const SweepResult result = run_sweep(config, only);
  if (out_dir.empty()) out_dir = (std::filesystem::path(config.output_dir) / "sweep").string();
  std::filesystem::create_directories(out_dir);
  write_text_file(std::filesystem::path(out_dir) / "sweep.csv", format_sweep_csv(result));
  write_text_file(std::filesystem::path(out_dir) / "best.json", best_to_json(result).dump(2) + "\n");
  for (const auto& [kind, value] : result.best)
    out << to_string(kind) << ": best " << to_string(result.parameter) << " = " << format_number(value) << "\n";
  out << "sweep written to " << out_dir << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& seeds, std::string out_dir,
            const std::string& alpha_from, const std::string& optimizer, std::ostream& out) {
  ExperimentConfig config = load_config(config_path);
  if (!alpha_from.empty()) apply_best(config, nlohmann::json::parse(read_text_file(alpha_from)));
  if (!seeds.empty()) config.seeds = parse_seed_range(seeds);
  if (!out_dir.empty()) config.output_dir = out_dir;
  keep_only(config, optimizer);
  require_alphas(config);
  config.validate();

  RunManifest manifest;
  manifest.started = utc_timestamp();
  manifest.config_hash = config_hash(config);
  manifest.config = to_json(config);
  manifest.dataset_checksums = dataset_checksums(config);
  manifest.seeds = config.seeds.list();

  std::vector<RunJob> jobs;
  for (const auto& o : config.optimizers)
    for (auto s : manifest.seeds) jobs.push_back({o, s});

  std::vector<ResultRow> rows;
  std::string log;
  std::size_t violations = 0;
  if (config.supervised()) {
    const SupervisedTestbed tb = make_supervised_testbed(config, FoldRole::evaluation);
    const auto results = run_supervised_batch(tb, jobs);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      rows.push_back(make_row(config.testbed, jobs[i].optimizer, results[i]));
      log += format_metric_log(run_id(config.testbed, jobs[i].optimizer, jobs[i].seed), results[i].records);
      violations += results[i].diagnostics.purity_violations;
    }
  } else {
    const RlTestbed tb = make_rl_testbed(config);
    const auto results = run_rl_batch(tb, jobs);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      rows.push_back(make_row(config.testbed, jobs[i].optimizer, results[i]));
      log += format_metric_log(run_id(config.testbed, jobs[i].optimizer, jobs[i].seed), results[i].records);
      violations += results[i].diagnostics.purity_violations;
    }
  }
  manifest.finished = utc_timestamp();
  write_results(config.output_dir, rows, log, manifest);

  const auto completed = std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) {
    return r.status == to_string(RunStatus::completed);
  });
  out << rows.size() << " runs (" << completed << " completed) written to " << config.output_dir << "\n";
  if (config.metrics.verify_purity) out << "metric purity violations: " << violations << "\n";
  return violations == 0 ? 0 : 1;
}

int cmd_report(const std::string& dir, const std::string& style, const std::string& out_path, std::ostream& out) {
  const auto rows = read_results(dir);
  std::string text;
  if (style == "table4" || style == "both") text += render_table4(rows);
  if (style == "both") text += "\n";
  if (style == "table7" || style == "both") text += render_table7(rows);
  out << text;
  if (!out_path.empty()) write_text_file(out_path, text);
  return 0;
}

}  // namespace

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Catastrophic forgetting measurement harness", "fbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);

  std::string dataset, dir, config_path, optimizer, seeds, out_dir, alpha_from, results_dir, style = "both", out_file,
                                                                                               testbed, scale = "desk";

  auto* ingest = app.add_subcommand("ingest", "Validate local IDX training files and record their checksums");
  ingest->add_option("--dataset", dataset, "mnist or fashion_mnist")->required();
  ingest->add_option("--dir", dir, "Directory holding the training IDX files")->required();
  ingest->add_option("--out", out_file, "Checksum file (default <dir>/fbench-checksums.json)");

  auto* sweep = app.add_subcommand("sweep", "Grid-search one optimizer hyperparameter");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--optimizer", optimizer, "Only sweep this optimizer");
  sweep->add_option("--seeds", seeds, "Sweep seeds, a..b");
  sweep->add_option("--out", out_dir, "Output directory (default <output_dir>/sweep)");

  auto* run = app.add_subcommand("run", "Run every optimizer over the report seeds");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seeds", seeds, "Report seeds, a..b");
  run->add_option("--out", out_dir, "Output directory (default from config)");
  run->add_option("--alpha-from", alpha_from, "best.json written by sweep");
  run->add_option("--optimizer", optimizer, "Only run this optimizer");

  auto* report = app.add_subcommand("report", "Summaries and rankings from a results directory");
  report->add_option("--results", results_dir, "Directory holding results.csv")->required();
  report->add_option("--style", style, "table4, table7 or both")
      ->check(CLI::IsMember({"table4", "table7", "both"}));
  report->add_option("--out", out_file, "Also write the report here");

  auto* defaults = app.add_subcommand("defaults", "Print the fully resolved default config of a testbed");
  defaults->add_option("--testbed", testbed, "mnist, fashion_mnist, mountain_car or acrobot")->required();
  defaults->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return cmd_ingest(dataset, dir, out_file, out);
    if (*sweep) return cmd_sweep(config_path, optimizer, seeds, out_dir, out);
    if (*run) return cmd_run(config_path, seeds, out_dir, alpha_from, optimizer, out);
    if (*report) return cmd_report(results_dir, style, out_file, out);
    if (*defaults) {
      nlohmann::json doc{{"experiment", {{"testbed", testbed}, {"scale", scale}}}};
      out << to_json(parse_config(doc)).dump(2) << "\n";
      return 0;
    }
  } catch (const fb::Error& e) {
    err << "fbench: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "fbench: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "fbench: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace fb
