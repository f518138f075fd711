#pragma once

// Result rows, metric logs and run manifests, plus their text encodings.
// Numbers are written with 17 significant digits, so reading a file back
// reproduces every double exactly. Missing values are empty CSV fields and
// JSON nulls.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fbench/config.hpp"
#include "fbench/runner.hpp"

namespace fb {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct ResultRow {
  std::string testbed;
  std::string optimizer;
  double alpha = 0.0;
  std::optional<double> mu;   // momentum only
  std::optional<double> rho;  // rmsprop only
  std::uint64_t seed = 0;
  std::string status;
  std::array<std::optional<double>, 4> phase_length;
  std::optional<double> retention;
  std::optional<double> relearning;
  std::optional<double> overlap_final;
  std::optional<double> overlap_mean;
  std::optional<double> overlap_last_phase;  // supervised: mean over phase 4 records
  std::optional<double> interference_final;
  std::optional<double> interference_mean;
  std::optional<double> interference_last_phase;
  std::optional<double> rmsve_final;
  std::optional<double> rmsve_mean;
  std::optional<double> rmsve_auc;  // sum over episodes of RMSVE^2
  std::optional<double> episodes;
  std::size_t unstable_pairs = 0;

  // Value of a numeric column by header name; nullopt when empty.
  std::optional<double> metric(const std::string& column) const;

  bool operator==(const ResultRow&) const = default;
};

// Header names in file order.
const std::vector<std::string>& result_columns();

ResultRow make_row(Testbed testbed, const OptimizerConfig& optimizer, const SupervisedRunResult& run);
ResultRow make_row(Testbed testbed, const OptimizerConfig& optimizer, const RLRunResult& run);

// e.g. "mnist/sgd/alpha=0.0625/seed=1000"
std::string run_id(Testbed testbed, const OptimizerConfig& optimizer, std::uint64_t seed);

std::string format_number(double v);  // 17 significant digits
double parse_number(std::string_view s);  // throws FormatError

std::string format_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(std::string_view text);  // throws FormatError

// One JSON object per record.
std::string format_metric_log(const std::string& run_id, const std::vector<MetricRecord>& records);

struct RunManifest {
  std::string config_hash;
  std::string version = kArtifactVersion;
  std::map<std::string, std::string> dataset_checksums;  // file name -> sha256
  std::vector<std::uint64_t> seeds;
  std::string started;  // ISO 8601 UTC
  std::string finished;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

std::string utc_timestamp();

// SHA-256 of the training IDX files the config reads; empty for synthetic data.
std::map<std::string, std::string> dataset_checksums(const ExperimentConfig& config);

// results.csv, metrics.jsonl and manifest.json under `dir`, created if needed.
// Throws IoError naming the path on failure.
void write_results(const std::filesystem::path& dir, const std::vector<ResultRow>& rows,
                   const std::string& metric_log, const RunManifest& manifest);
std::vector<ResultRow> read_results(const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fb
