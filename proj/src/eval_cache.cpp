#include <charconv>
#include <fstream>
#include <sstream>

#include "fbench/environment.hpp"

namespace fb {

namespace {

constexpr const char* kMagic = "fbench-evalset";
constexpr int kVersion = 1;

std::string header_line(const EvalCacheKey& key) {
  std::ostringstream os;
  os << kMagic << " v" << kVersion << " env=" << to_string(key.env) << " seed=" << key.seed
     << " n_transitions=" << key.n_transitions << " n_states=" << key.n_states
     << " dynamics=" << (key.literal_dynamics ? "literal" : "standard");
  return os.str();
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, end);
}

}  // namespace

std::string eval_cache_file_name(const EvalCacheKey& key) {
  std::ostringstream os;
  os << "evalset_" << to_string(key.env) << (key.literal_dynamics ? "_literal" : "") << "_s" << key.seed
     << "_t" << key.n_transitions << "_n" << key.n_states << ".txt";
  return os.str();
}

void save_eval_cache(const std::filesystem::path& path, const EvalCacheKey& key, const EvalStateSet& set) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << header_line(key) << '\n';
  out << "columns obs_dim=" << set.observations.rows() << " weight true_value\n";
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(set.size()); ++i) {
    for (Eigen::Index r = 0; r < set.observations.rows(); ++r) out << format_double(set.observations(r, i)) << ' ';
    out << format_double(set.weights(i)) << ' ' << format_double(set.true_values(i)) << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

std::optional<EvalStateSet> load_eval_cache(const std::filesystem::path& path, const EvalCacheKey& key) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || line != header_line(key)) return std::nullopt;
  if (!std::getline(in, line)) return std::nullopt;
  const auto eq = line.find("obs_dim=");
  if (eq == std::string::npos) return std::nullopt;
  const int dim = std::stoi(line.substr(eq + 8));

  EvalStateSet set;
  const auto n = static_cast<Eigen::Index>(key.n_states);
  set.observations.resize(dim, n);
  set.weights.resize(n);
  set.true_values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int r = 0; r < dim; ++r)
      if (!(in >> set.observations(r, i))) return std::nullopt;
    if (!(in >> set.weights(i) >> set.true_values(i))) return std::nullopt;
  }
  return set;
}

}  // namespace fb
