#include "fbench/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "fbench/error.hpp"

namespace fb {

using nlohmann::json;

std::string to_string(Testbed t) {
  switch (t) {
    case Testbed::mnist: return "mnist";
    case Testbed::fashion_mnist: return "fashion_mnist";
    case Testbed::mountain_car: return "mountain_car";
    case Testbed::acrobot: return "acrobot";
  }
  return "?";
}

Testbed testbed_from_string(const std::string& s) {
  for (Testbed t : {Testbed::mnist, Testbed::fashion_mnist, Testbed::mountain_car, Testbed::acrobot})
    if (to_string(t) == s) return t;
  throw ConfigError("unknown testbed '" + s + "'");
}

bool is_supervised(Testbed t) { return t == Testbed::mnist || t == Testbed::fashion_mnist; }

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::alpha: return "alpha";
    case SweepParameter::mu: return "mu";
    case SweepParameter::rho: return "rho";
  }
  return "?";
}

namespace {

std::string to_string(ScalePreset s) { return s == ScalePreset::desk ? "desk" : "paper"; }
std::string to_string(DataSource s) { return s == DataSource::idx ? "idx" : "synthetic"; }
std::string to_string(RunningAccuracy r) { return r == RunningAccuracy::cumulative ? "cumulative" : "exponential"; }

template <class E>
E enum_from(const std::string& key, const std::string& value, std::initializer_list<E> options) {
  for (E e : options)
    if (to_string(e) == value) return e;
  throw ConfigError("invalid value '" + value + "' for " + key);
}

// Reads keys out of one JSON object and complains about whatever is left.
class Section {
 public:
  Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + path(key) + "'");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong type for '" + path(key) + "'");
    }
  }

  std::string text(const std::string& key) {
    std::string out;
    read(key, out);
    return out;
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  const json& obj_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_seeds(Section& parent, const std::string& key, SeedRange& out) {
  if (!parent.has(key)) return;
  Section s(parent.at(key), parent.path(key));
  s.read("first", out.first);
  s.read("count", out.count);
}

json seeds_json(const SeedRange& r) { return {{"first", r.first}, {"count", r.count}}; }

constexpr double kUnsetAlpha = std::numeric_limits<double>::quiet_NaN();

std::vector<OptimizerConfig> all_optimizers() {
  std::vector<OptimizerConfig> out;
  for (OptimizerKind k : {OptimizerKind::sgd, OptimizerKind::momentum, OptimizerKind::rmsprop, OptimizerKind::adam}) {
    OptimizerConfig c;
    c.kind = k;
    c.alpha = kUnsetAlpha;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<std::uint64_t> SeedRange::list() const {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
  return out;
}

std::vector<double> SweepConfig::grid() const {
  if (!values.empty()) return values;
  if (!(exp_step > 0.0)) throw ConfigError("sweep.exp_step must be positive");
  std::vector<double> out;
  // Integer stepping keeps the grid free of accumulated rounding.
  const auto n = static_cast<long>(std::floor((exp_start - exp_stop) / exp_step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(std::exp2(exp_start - static_cast<double>(i) * exp_step));
  return out;
}

ExperimentConfig default_config(Testbed testbed, ScalePreset scale) {
  ExperimentConfig c;
  c.testbed = testbed;
  c.scale = scale;
  c.optimizers = all_optimizers();
  const bool paper = scale == ScalePreset::paper;
  c.seeds = {1000, paper ? std::size_t{500} : std::size_t{100}};
  c.sweep.seeds = {0, 50};
  switch (testbed) {
    case Testbed::mnist:
    case Testbed::fashion_mnist:
      c.network = NetworkSpec::mnist();
      c.metrics.phases = {1, 2, 3, 4};
      break;
    case Testbed::mountain_car:
      c.network = NetworkSpec::mountain_car();
      c.metrics.phases = {};
      c.sweep.exp_step = 0.5;
      break;
    case Testbed::acrobot:
      c.network = NetworkSpec::acrobot();
      c.metrics.phases = {};
      c.sweep.exp_step = 0.5;
      break;
  }
  c.rl.episodes = paper ? 500 : 100;
  c.rl.eval_transitions = paper ? 10'000'000 : 100'000;
  c.rl.eval_states = 500;
  c.output_dir = "results/" + to_string(testbed);
  return c;
}

void ExperimentConfig::validate() const {
  network.validate();
  if (supervised()) {
    if (network.output_kind != OutputKind::softmax_classification || network.output_size() != 4 ||
        network.input_size() != 784)
      throw ConfigError("supervised testbeds need a 784-input, 4-output classification network");
  } else {
    const std::size_t obs = testbed == Testbed::mountain_car ? 2 : 6;
    if (network.output_kind != OutputKind::scalar_value || network.output_size() != 1 || network.input_size() != obs)
      throw ConfigError("value network for " + to_string(testbed) + " needs " + std::to_string(obs) +
                        " inputs and one scalar output");
  }
  if (optimizers.empty()) throw ConfigError("optimizers must list at least one optimizer");
  std::set<OptimizerKind> kinds;
  for (const auto& o : optimizers) {
    if (!kinds.insert(o.kind).second) throw ConfigError("optimizer '" + to_string(o.kind) + "' listed twice");
    OptimizerConfig check = o;
    if (std::isnan(check.alpha)) check.alpha = 0.0;
    check.validate();
  }
  if (seeds.count == 0) throw ConfigError("experiment.seeds.count must be at least 1");
  if (!(mastery.threshold >= 0.0 && mastery.threshold <= 1.0))
    throw ConfigError("mastery.threshold must lie in [0, 1]");
  if (mastery.streak < 1) throw ConfigError("mastery.streak must be at least 1");
  if (!(mastery.ema_decay >= 0.0 && mastery.ema_decay < 1.0)) throw ConfigError("mastery.ema_decay must lie in [0, 1)");
  if (rl.episodes < 1) throw ConfigError("rl.episodes must be at least 1");
  if (rl.eval_transitions < 1 || rl.eval_states < 1) throw ConfigError("rl eval-set sizes must be positive");
  if (rl.step_cap < 1) throw ConfigError("rl.step_cap must be positive");
  if (data.fold_count < 2) throw ConfigError("data.fold_count must be at least 2");
  auto check_fold = [&](int f, const std::string& what) {
    if (f < 0 || f >= data.fold_count) throw ConfigError(what + " fold " + std::to_string(f) + " out of range");
  };
  for (int f : data.sweep_folds) check_fold(f, "data.sweep_folds");
  for (int f : data.eval_folds) check_fold(f, "data.eval_folds");
  for (int f : data.probe_folds) check_fold(f, "data.probe_folds");
  check_fold(data.retention_fold, "data.retention_fold");
  if (data.probe_folds.empty()) throw ConfigError("data.probe_folds must not be empty");
  for (int f : data.eval_folds)
    if (f == data.retention_fold) throw ConfigError("data.retention_fold must not be a training fold");
  std::set<int> classes{data.subtask_a[0], data.subtask_a[1], data.subtask_b[0], data.subtask_b[1]};
  if (classes.size() != 4) throw ConfigError("subtask classes must be four distinct classes");
  for (int k : classes)
    if (k < 0 || k > 9) throw ConfigError("subtask class " + std::to_string(k) + " out of range");
  if (data.probe_per_class < 1) throw ConfigError("data.probe_per_class must be at least 1");
  for (int p : metrics.phases)
    if (p < 1 || p > 4) throw ConfigError("metrics.phases entries must be 1..4");
  if (sweep.seeds.count == 0) throw ConfigError("sweep.seeds.count must be at least 1");
  if (sweep.grid().empty()) throw ConfigError("sweep grid is empty");
}

ExperimentConfig parse_config(const json& doc) {
  Section root(doc, "");
  Testbed testbed = Testbed::mnist;
  ScalePreset scale = ScalePreset::desk;
  // The testbed and scale choose the defaults everything else overrides, so
  // they are looked up first.
  if (doc.contains("experiment") && doc.at("experiment").is_object()) {
    const json& e = doc.at("experiment");
    if (e.contains("testbed")) {
      if (!e.at("testbed").is_string()) throw ConfigError("wrong type for 'experiment.testbed'");
      testbed = testbed_from_string(e.at("testbed").get<std::string>());
    }
    if (e.contains("scale")) {
      if (!e.at("scale").is_string()) throw ConfigError("wrong type for 'experiment.scale'");
      scale = enum_from("experiment.scale", e.at("scale").get<std::string>(), {ScalePreset::desk, ScalePreset::paper});
    }
  }
  ExperimentConfig c = default_config(testbed, scale);

  if (root.has("experiment")) {
    Section s(root.at("experiment"), "experiment");
    s.has("testbed");
    s.has("scale");
    read_seeds(s, "seeds", c.seeds);
    s.read("output_dir", c.output_dir);
  }
  if (root.has("network")) {
    Section s(root.at("network"), "network");
    s.read("layers", c.network.layer_sizes);
    if (s.has("init")) c.network.init_scheme = init_scheme_from_string(s.text("init"));
    s.read("init_mean", c.network.init_mean);
    s.read("init_std", c.network.init_std);
    s.read("bias_std", c.network.bias_std);
  }
  if (root.has("optimizers")) {
    const json& list = root.at("optimizers");
    if (!list.is_array()) throw ConfigError("optimizers must be an array");
    c.optimizers.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section s(list[i], "optimizers[" + std::to_string(i) + "]");
      OptimizerConfig o;
      o.alpha = kUnsetAlpha;
      if (!s.has("kind")) throw ConfigError("missing key '" + s.path("kind") + "'");
      std::string kind;
      s.read("kind", kind);
      o.kind = optimizer_kind_from_string(kind);
      s.read("alpha", o.alpha);
      s.read("mu", o.mu);
      s.read("rho", o.rho);
      s.read("beta1", o.beta1);
      s.read("beta2", o.beta2);
      s.read("epsilon", o.epsilon);
      c.optimizers.push_back(o);
    }
  }
  if (root.has("mastery")) {
    Section s(root.at("mastery"), "mastery");
    s.read("threshold", c.mastery.threshold);
    s.read("streak", c.mastery.streak);
    if (s.has("running"))
      c.mastery.running = enum_from("mastery.running", s.text("running"),
                                    {RunningAccuracy::cumulative, RunningAccuracy::exponential});
    s.read("ema_decay", c.mastery.ema_decay);
  }
  if (root.has("data")) {
    Section s(root.at("data"), "data");
    if (s.has("source"))
      c.data.source = enum_from("data.source", s.text("source"), {DataSource::idx, DataSource::synthetic});
    s.read("dir", c.data.dir);
    s.read("fold_count", c.data.fold_count);
    s.read("fold_seed", c.data.fold_seed);
    s.read("subtask_a", c.data.subtask_a);
    s.read("subtask_b", c.data.subtask_b);
    s.read("sweep_folds", c.data.sweep_folds);
    s.read("eval_folds", c.data.eval_folds);
    s.read("probe_folds", c.data.probe_folds);
    s.read("retention_fold", c.data.retention_fold);
    s.read("probe_per_class", c.data.probe_per_class);
    s.read("synth_per_class", c.data.synth_per_class);
    s.read("synth_seed", c.data.synth_seed);
    s.read("synth_spread", c.data.synth_spread);
  }
  if (root.has("rl")) {
    Section s(root.at("rl"), "rl");
    s.read("episodes", c.rl.episodes);
    s.read("eval_transitions", c.rl.eval_transitions);
    s.read("eval_states", c.rl.eval_states);
    s.read("eval_seed", c.rl.eval_seed);
    s.read("eval_per_seed", c.rl.eval_per_seed);
    s.read("cache_dir", c.rl.cache_dir);
    s.read("mc_literal_dynamics", c.rl.mc_literal_dynamics);
    s.read("step_cap", c.rl.step_cap);
    s.read("probe_seed", c.rl.probe_seed);
  }
  if (root.has("metrics")) {
    Section s(root.at("metrics"), "metrics");
    s.read("every", c.metrics.every);
    s.read("phases", c.metrics.phases);
    s.read("overlap", c.metrics.overlap);
    s.read("interference", c.metrics.interference);
    s.read("verify_purity", c.metrics.verify_purity);
  }
  if (root.has("sweep")) {
    Section s(root.at("sweep"), "sweep");
    if (s.has("parameter"))
      c.sweep.parameter = enum_from("sweep.parameter", s.text("parameter"),
                                    {SweepParameter::alpha, SweepParameter::mu, SweepParameter::rho});
    s.read("values", c.sweep.values);
    s.read("exp_start", c.sweep.exp_start);
    s.read("exp_stop", c.sweep.exp_stop);
    s.read("exp_step", c.sweep.exp_step);
    read_seeds(s, "seeds", c.sweep.seeds);
    s.read("metrics", c.sweep.metrics);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json opts = json::array();
  for (const auto& o : c.optimizers) {
    json j{{"kind", to_string(o.kind)}, {"mu", o.mu}, {"rho", o.rho}, {"beta1", o.beta1},
           {"beta2", o.beta2}, {"epsilon", o.epsilon}};
    j["alpha"] = std::isnan(o.alpha) ? json(nullptr) : json(o.alpha);
    opts.push_back(j);
  }
  return {
      {"experiment",
       {{"testbed", to_string(c.testbed)}, {"scale", to_string(c.scale)}, {"seeds", seeds_json(c.seeds)},
        {"output_dir", c.output_dir}}},
      {"network",
       {{"layers", c.network.layer_sizes}, {"init", to_string(c.network.init_scheme)},
        {"init_mean", c.network.init_mean}, {"init_std", c.network.init_std}, {"bias_std", c.network.bias_std}}},
      {"optimizers", opts},
      {"mastery",
       {{"threshold", c.mastery.threshold}, {"streak", c.mastery.streak},
        {"running", to_string(c.mastery.running)}, {"ema_decay", c.mastery.ema_decay}}},
      {"data",
       {{"source", to_string(c.data.source)}, {"dir", c.data.dir}, {"fold_count", c.data.fold_count},
        {"fold_seed", c.data.fold_seed}, {"subtask_a", c.data.subtask_a}, {"subtask_b", c.data.subtask_b},
        {"sweep_folds", c.data.sweep_folds}, {"eval_folds", c.data.eval_folds},
        {"probe_folds", c.data.probe_folds}, {"retention_fold", c.data.retention_fold},
        {"probe_per_class", c.data.probe_per_class}, {"synth_per_class", c.data.synth_per_class},
        {"synth_seed", c.data.synth_seed}, {"synth_spread", c.data.synth_spread}}},
      {"rl",
       {{"episodes", c.rl.episodes}, {"eval_transitions", c.rl.eval_transitions},
        {"eval_states", c.rl.eval_states}, {"eval_seed", c.rl.eval_seed},
        {"eval_per_seed", c.rl.eval_per_seed}, {"cache_dir", c.rl.cache_dir},
        {"mc_literal_dynamics", c.rl.mc_literal_dynamics}, {"step_cap", c.rl.step_cap},
        {"probe_seed", c.rl.probe_seed}}},
      {"metrics",
       {{"every", c.metrics.every}, {"phases", c.metrics.phases}, {"overlap", c.metrics.overlap},
        {"interference", c.metrics.interference}, {"verify_purity", c.metrics.verify_purity}}},
      {"sweep",
       {{"parameter", to_string(c.sweep.parameter)}, {"values", c.sweep.values},
        {"exp_start", c.sweep.exp_start}, {"exp_stop", c.sweep.exp_stop}, {"exp_step", c.sweep.exp_step},
        {"seeds", seeds_json(c.sweep.seeds)}, {"metrics", c.sweep.metrics}}},
  };
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  // output_dir and cache_dir say where things go, not what is computed.
  json doc = to_json(config);
  doc["experiment"].erase("output_dir");
  doc["rl"].erase("cache_dir");
  const std::string text = doc.dump();
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace fb
