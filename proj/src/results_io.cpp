#include "fbench/results.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "fbench/dataset.hpp"
#include "fbench/error.hpp"

namespace fb {

using nlohmann::json;

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> optional_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  return parse_number(s);
}

std::string json_field(const std::optional<double>& v) { return v ? format_number(*v) : "null"; }

}  // namespace

std::optional<double> ResultRow::metric(const std::string& column) const {
  if (column == "phase1") return phase_length[0];
  if (column == "phase2") return phase_length[1];
  if (column == "phase3") return phase_length[2];
  if (column == "phase4") return phase_length[3];
  if (column == "retention") return retention;
  if (column == "relearning") return relearning;
  if (column == "overlap_final") return overlap_final;
  if (column == "overlap_mean") return overlap_mean;
  if (column == "overlap_last_phase") return overlap_last_phase;
  if (column == "interference_final") return interference_final;
  if (column == "interference_mean") return interference_mean;
  if (column == "interference_last_phase") return interference_last_phase;
  if (column == "rmsve_final") return rmsve_final;
  if (column == "rmsve_mean") return rmsve_mean;
  if (column == "rmsve_auc") return rmsve_auc;
  if (column == "episodes") return episodes;
  throw UsageError("no numeric result column named '" + column + "'");
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> columns{
      "testbed",         "optimizer",          "alpha",
      "mu",              "rho",                "seed",
      "status",          "phase1",             "phase2",
      "phase3",          "phase4",             "retention",
      "relearning",      "overlap_final",      "overlap_mean",
      "overlap_last_phase", "interference_final", "interference_mean",
      "interference_last_phase", "rmsve_final", "rmsve_mean",
      "rmsve_auc",       "episodes",           "unstable_pairs"};
  return columns;
}

namespace {

ResultRow row_header(Testbed testbed, const OptimizerConfig& o, std::uint64_t seed, RunStatus status) {
  ResultRow row;
  row.testbed = to_string(testbed);
  row.optimizer = to_string(o.kind);
  row.alpha = o.alpha;
  if (o.kind == OptimizerKind::momentum) row.mu = o.mu;
  if (o.kind == OptimizerKind::rmsprop) row.rho = o.rho;
  row.seed = seed;
  row.status = to_string(status);
  return row;
}

}  // namespace

ResultRow make_row(Testbed testbed, const OptimizerConfig& optimizer, const SupervisedRunResult& run) {
  ResultRow row = row_header(testbed, optimizer, run.seed, run.status);
  for (std::size_t p = 0; p < 4; ++p)
    if (run.phase_lengths[p]) row.phase_length[p] = static_cast<double>(*run.phase_lengths[p]);
  row.retention = run.retention;
  row.relearning = run.relearning;
  std::vector<double> ov, ov_last, pi, pi_last;
  for (const auto& r : run.records) {
    if (r.overlap) {
      ov.push_back(*r.overlap);
      if (r.phase == 4) ov_last.push_back(*r.overlap);
    }
    if (r.interference) {
      pi.push_back(*r.interference);
      if (r.phase == 4) pi_last.push_back(*r.interference);
    }
  }
  if (!ov.empty()) row.overlap_final = ov.back();
  if (!pi.empty()) row.interference_final = pi.back();
  row.overlap_mean = mean_of(ov);
  row.overlap_last_phase = mean_of(ov_last);
  row.interference_mean = mean_of(pi);
  row.interference_last_phase = mean_of(pi_last);
  row.unstable_pairs = run.diagnostics.unstable_pairs;
  return row;
}

ResultRow make_row(Testbed testbed, const OptimizerConfig& optimizer, const RLRunResult& run) {
  ResultRow row = row_header(testbed, optimizer, run.seed, run.status);
  std::vector<double> ov, pi, err;
  double auc = 0.0;
  for (const auto& r : run.records) {
    if (r.overlap) ov.push_back(*r.overlap);
    if (r.interference) pi.push_back(*r.interference);
    if (r.rmsve) {
      err.push_back(*r.rmsve);
      auc += *r.rmsve * *r.rmsve;
    }
  }
  if (!ov.empty()) row.overlap_final = ov.back();
  if (!pi.empty()) row.interference_final = pi.back();
  if (!err.empty()) {
    row.rmsve_final = err.back();
    row.rmsve_auc = auc;
  }
  row.overlap_mean = mean_of(ov);
  row.interference_mean = mean_of(pi);
  row.rmsve_mean = mean_of(err);
  row.episodes = static_cast<double>(run.records.size());
  row.unstable_pairs = run.diagnostics.unstable_pairs;
  return row;
}

std::string run_id(Testbed testbed, const OptimizerConfig& o, std::uint64_t seed) {
  std::string id = to_string(testbed) + "/" + to_string(o.kind) + "/alpha=" + format_number(o.alpha);
  if (o.kind == OptimizerKind::momentum) id += "/mu=" + format_number(o.mu);
  if (o.kind == OptimizerKind::rmsprop) id += "/rho=" + format_number(o.rho);
  return id + "/seed=" + std::to_string(seed);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("invalid number '" + std::string(s) + "'", 0);
  return v;
}

std::string format_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  const auto& cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    out << r.testbed << ',' << r.optimizer << ',' << format_number(r.alpha) << ',' << field(r.mu) << ','
        << field(r.rho) << ',' << r.seed << ',' << r.status;
    for (const auto& p : r.phase_length) out << ',' << field(p);
    for (const auto* v : {&r.retention, &r.relearning, &r.overlap_final, &r.overlap_mean, &r.overlap_last_phase,
                          &r.interference_final, &r.interference_mean, &r.interference_last_phase, &r.rmsve_final,
                          &r.rmsve_mean, &r.rmsve_auc, &r.episodes})
      out << ',' << field(*v);
    out << ',' << r.unstable_pairs << '\n';
  }
  return out.str();
}

std::vector<ResultRow> parse_csv(std::string_view text) {
  const auto lines = split(text, '\n');
  const auto& cols = result_columns();
  if (lines.empty()) throw FormatError("empty results file", 0);
  std::size_t offset = 0;
  {
    const auto header = split(lines[0], ',');
    bool ok = header.size() == cols.size();
    for (std::size_t i = 0; ok && i < cols.size(); ++i) ok = header[i] == cols[i];
    if (!ok) throw FormatError("results header does not match the expected columns", 0);
  }
  std::vector<ResultRow> rows;
  offset += lines[0].size() + 1;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string_view line = lines[li];
    if (line.empty()) {
      offset += 1;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != cols.size())
      throw FormatError("results line " + std::to_string(li + 1) + " has " + std::to_string(f.size()) +
                            " fields, expected " + std::to_string(cols.size()),
                        offset);
    try {
      ResultRow r;
      std::size_t k = 0;
      r.testbed = std::string(f[k++]);
      r.optimizer = std::string(f[k++]);
      r.alpha = parse_number(f[k++]);
      r.mu = optional_number(f[k++]);
      r.rho = optional_number(f[k++]);
      const auto seed_field = f[k++];
      const auto sres = std::from_chars(seed_field.data(), seed_field.data() + seed_field.size(), r.seed);
      if (sres.ec != std::errc() || sres.ptr != seed_field.data() + seed_field.size())
        throw FormatError("invalid seed '" + std::string(seed_field) + "'", 0);
      r.status = std::string(f[k++]);
      for (auto& p : r.phase_length) p = optional_number(f[k++]);
      for (auto* v : {&r.retention, &r.relearning, &r.overlap_final, &r.overlap_mean, &r.overlap_last_phase,
                      &r.interference_final, &r.interference_mean, &r.interference_last_phase, &r.rmsve_final,
                      &r.rmsve_mean, &r.rmsve_auc, &r.episodes})
        *v = optional_number(f[k++]);
      const auto up = f[k++];
      const auto ures = std::from_chars(up.data(), up.data() + up.size(), r.unstable_pairs);
      if (ures.ec != std::errc() || ures.ptr != up.data() + up.size())
        throw FormatError("invalid unstable_pairs '" + std::string(up) + "'", 0);
      rows.push_back(std::move(r));
    } catch (const FormatError& e) {
      throw FormatError(std::string("results line ") + std::to_string(li + 1) + ": " + e.what(), offset);
    }
    offset += line.size() + 1;
  }
  return rows;
}

std::string format_metric_log(const std::string& id, const std::vector<MetricRecord>& records) {
  std::ostringstream out;
  const std::string quoted = json(id).dump();
  for (const auto& r : records) {
    out << "{\"run_id\":" << quoted << ",\"index\":" << r.index << ",\"phase\":" << r.phase
        << ",\"overlap\":" << json_field(r.overlap) << ",\"interference\":" << json_field(r.interference)
        << ",\"rmsve\":" << json_field(r.rmsve) << ",\"loss\":" << format_number(r.loss) << "}\n";
  }
  return out.str();
}

json RunManifest::to_json() const {
  return {{"config_hash", config_hash}, {"version", version},   {"dataset_checksums", dataset_checksums},
          {"seeds", seeds},             {"started", started},   {"finished", finished},
          {"config", config}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::map<std::string, std::string> dataset_checksums(const ExperimentConfig& config) {
  std::map<std::string, std::string> out;
  if (!config.supervised() || config.data.source != DataSource::idx) return out;
  const IdxFiles files = locate_training_files(config.data.dir);
  for (const auto& path : {files.images, files.labels}) {
    const std::string raw = read_text_file(path);
    out[path.filename().string()] = sha256_hex({reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()});
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_results(const std::filesystem::path& dir, const std::vector<ResultRow>& rows,
                   const std::string& metric_log, const RunManifest& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "results.csv", format_csv(rows));
  write_text_file(dir / "metrics.jsonl", metric_log);
  write_text_file(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
}

std::vector<ResultRow> read_results(const std::filesystem::path& dir) {
  return parse_csv(read_text_file(dir / "results.csv"));
}

}  // namespace fb
