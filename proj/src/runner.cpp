#include "fbench/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>

#include <omp.h>

#include "fbench/error.hpp"

namespace fb {

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::stream_exhausted: return "stream_exhausted";
    case RunStatus::numerical_instability: return "numerical_instability";
  }
  return "?";
}

RunStatus run_status_from_string(const std::string& s) {
  for (RunStatus r : {RunStatus::completed, RunStatus::stream_exhausted, RunStatus::numerical_instability})
    if (to_string(r) == s) return r;
  throw FormatError("unknown run status '" + s + "'", 0);
}

bool MasteryTracker::record(bool correct) {
  ++steps_;
  if (correct) ++correct_;
  const double hit = correct ? 1.0 : 0.0;
  ema_ = steps_ == 1 ? hit : config_.ema_decay * ema_ + (1.0 - config_.ema_decay) * hit;
  if (running_accuracy() >= config_.threshold)
    ++consecutive_;
  else
    consecutive_ = 0;
  return consecutive_ >= config_.streak;
}

void MasteryTracker::reset() {
  steps_ = 0;
  correct_ = 0;
  consecutive_ = 0;
  ema_ = 0.0;
}

double MasteryTracker::running_accuracy() const {
  if (steps_ == 0) return 0.0;
  if (config_.running == RunningAccuracy::exponential) return ema_;
  return static_cast<double>(correct_) / static_cast<double>(steps_);
}

std::optional<std::size_t> SupervisedRunResult::total_steps() const {
  std::size_t total = 0;
  for (const auto& len : phase_lengths) {
    if (!len) return std::nullopt;
    total += *len;
  }
  return total;
}

std::vector<double> RLRunResult::rmsve() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records)
    if (r.rmsve) out.push_back(*r.rmsve);
  return out;
}

namespace {

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

LabeledBatch to_batch(const std::vector<Example>& examples, const PhaseSchedule& schedule) {
  LabeledBatch batch;
  if (examples.empty()) return batch;
  batch.inputs.resize(examples.front().features.size(), static_cast<Eigen::Index>(examples.size()));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    batch.inputs.col(static_cast<Eigen::Index>(i)) = examples[i].features;
    batch.units.push_back(schedule.output_unit(examples[i].label));
  }
  return batch;
}

bool cadence_due(const MetricConfig& m, std::size_t index, int phase) {
  if (m.every == 0 || index % m.every != 0) return false;
  return phase == 0 || std::find(m.phases.begin(), m.phases.end(), phase) != m.phases.end();
}

}  // namespace

std::shared_ptr<const ImageDataset> load_dataset(const ExperimentConfig& config) {
  if (config.data.source == DataSource::synthetic)
    return std::make_shared<const ImageDataset>(
        synth_dataset(config.data.synth_per_class, 10, config.data.synth_seed, config.data.synth_spread));
  if (config.data.dir.empty())
    throw ConfigError("data.dir must name the directory holding the " + to_string(config.testbed) + " IDX files");
  return std::make_shared<const ImageDataset>(load_training_set(config.data.dir));
}

SupervisedTestbed make_supervised_testbed(const ExperimentConfig& config, FoldRole role,
                                          std::shared_ptr<const ImageDataset> data) {
  if (!config.supervised()) throw UsageError(to_string(config.testbed) + " is not a supervised testbed");
  SupervisedTestbed tb;
  tb.config = config;
  tb.data = data ? std::move(data) : load_dataset(config);
  tb.folds = stratified_folds(tb.data->labels(), config.data.fold_count, config.data.fold_seed);
  const auto& f = role == FoldRole::sweep ? config.data.sweep_folds : config.data.eval_folds;
  tb.schedule.subtask_a = config.data.subtask_a;
  tb.schedule.subtask_b = config.data.subtask_b;
  tb.schedule.first_fold = f[0];
  tb.schedule.second_fold = f[1];
  tb.schedule.validate(tb.folds.fold_count);

  for (int fold = 0; fold < config.data.fold_count; ++fold) {
    const bool probe = std::find(config.data.probe_folds.begin(), config.data.probe_folds.end(), fold) !=
                       config.data.probe_folds.end();
    if (!probe) tb.excluded_folds.push_back(fold);
    if (probe && (fold == f[0] || fold == f[1]))
      throw ConfigError("probe fold " + std::to_string(fold) + " is also a training fold");
  }
  if (config.data.retention_fold == f[0] || config.data.retention_fold == f[1])
    throw ConfigError("retention fold " + std::to_string(config.data.retention_fold) + " is also a training fold");

  std::vector<Example> held_out;
  for (std::size_t i = 0; i < tb.data->size(); ++i) {
    const int label = tb.data->label(i);
    if (tb.folds.fold_of[i] == config.data.retention_fold &&
        (label == config.data.subtask_a[0] || label == config.data.subtask_a[1]))
      held_out.push_back(tb.data->example(i));
  }
  if (held_out.empty()) throw ConfigError("retention fold holds no first-subtask examples");
  tb.retention_set = to_batch(held_out, tb.schedule);
  return tb;
}

SupervisedRunResult run_supervised(const SupervisedTestbed& tb, const OptimizerConfig& optimizer,
                                   std::uint64_t seed, bool with_metrics) {
  const ExperimentConfig& cfg = tb.config;
  optimizer.validate();
  SupervisedRunResult result;
  result.seed = seed;

  NetworkParams params = init_network(cfg.network, seed);
  OptimizerState state = OptimizerState::fresh(optimizer, params.size());
  PhaseStream stream = build_phase_stream(*tb.data, tb.folds, tb.schedule, seed);

  const bool want_overlap = with_metrics && cfg.metrics.overlap;
  const bool want_pi = with_metrics && cfg.metrics.interference;
  const bool any_metric = with_metrics && cfg.metrics.every > 0;
  LabeledBatch probe;
  if (want_overlap || want_pi) {
    const auto classes = tb.schedule.classes();
    const ProbeSet set = build_probe_set(*tb.data, tb.folds, tb.excluded_folds, classes, cfg.data.probe_per_class, seed);
    probe = to_batch(set.examples, tb.schedule);
  }

  // Runs `fn`, which must only observe, and optionally checks that it did.
  auto observe = [&](auto&& fn) {
    ++result.diagnostics.metric_calls;
    if (!cfg.metrics.verify_purity) return fn();
    const Eigen::VectorXd params_before = params.values();
    const OptimizerState state_before = state;
    const PhaseStream stream_before = stream;
    auto value = fn();
    if (!same_bits(params_before, params.values()) || !(state_before == state) || !(stream_before == stream))
      ++result.diagnostics.purity_violations;
    return value;
  };

  MasteryTracker tracker(cfg.mastery);
  std::array<std::size_t, 4> lengths{};
  std::size_t global = 0;
  try {
    for (int p = 0; p < 4; ++p) {
      tracker.reset();
      for (;;) {
        const std::size_t idx = stream.next(p);
        const Eigen::VectorXd x = tb.data->features(idx);
        const int unit = tb.schedule.output_unit(tb.data->label(idx));
        const bool correct = argmax(forward(params, x).output()) == unit;
        const Gradients g = loss_and_gradient(params, x, ClassId{unit}, LossKind::cross_entropy);
        apply_update(optimizer, state, params, g,
                     to_string(optimizer.kind) + " seed " + std::to_string(seed) + " step " + std::to_string(global + 1));
        ++global;
        const bool mastered = tracker.record(correct);

        if (any_metric && cadence_due(cfg.metrics, tracker.steps(), p + 1)) {
          MetricRecord rec;
          rec.index = global;
          rec.phase = p + 1;
          rec.loss = g.loss;
          if (want_overlap) rec.overlap = observe([&] { return activation_overlap(params, probe.inputs); });
          if (want_pi) {
            const InterferenceResult pi = observe([&] {
              return pairwise_interference(params, optimizer, state, make_supervised_probe(params, probe));
            });
            rec.interference = pi.mean;
            result.diagnostics.unstable_pairs += pi.unstable_pairs;
          }
          result.records.push_back(rec);
        }
        if (mastered) break;
      }
      lengths[static_cast<std::size_t>(p)] = tracker.steps();
      result.phase_lengths[static_cast<std::size_t>(p)] = tracker.steps();
      if (p == 1) result.retention = observe([&] { return retention_accuracy(params, tb.retention_set); });
      if (p == 2) result.relearning = relearning_score(std::span<const std::size_t>(lengths.data(), 3));
    }
  } catch (const StreamExhausted& e) {
    result.status = RunStatus::stream_exhausted;
    result.message = e.what();
  } catch (const NumericalInstability& e) {
    result.status = RunStatus::numerical_instability;
    result.message = e.what();
  }
  return result;
}

EvalStateSet rl_eval_set(const ExperimentConfig& config, std::uint64_t seed) {
  const EvalCacheKey key{config.testbed == Testbed::mountain_car ? EnvId::mountain_car : EnvId::acrobot, seed,
                         config.rl.eval_transitions, config.rl.eval_states,
                         config.testbed == Testbed::mountain_car && config.rl.mc_literal_dynamics};
  std::filesystem::path path;
  if (!config.rl.cache_dir.empty()) {
    path = std::filesystem::path(config.rl.cache_dir) / eval_cache_file_name(key);
    if (auto cached = load_eval_cache(path, key)) return *cached;
  }
  EvalStateSet set;
  if (key.env == EnvId::mountain_car)
    set = sample_eval_states(MountainCar(key.literal_dynamics), key.n_transitions, key.n_states, seed, config.rl.step_cap);
  else
    set = sample_eval_states(Acrobot(), key.n_transitions, key.n_states, seed, config.rl.step_cap);
  if (!path.empty()) save_eval_cache(path, key, set);
  return set;
}

RlTestbed make_rl_testbed(const ExperimentConfig& config) {
  if (config.supervised()) throw UsageError(to_string(config.testbed) + " is not a value-estimation testbed");
  RlTestbed tb;
  tb.config = config;
  if (!config.rl.eval_per_seed) tb.eval = std::make_shared<const EvalStateSet>(rl_eval_set(config, config.rl.eval_seed));
  if (config.testbed == Testbed::mountain_car)
    tb.probe = make_td_probe_set(MountainCar(config.rl.mc_literal_dynamics), mountain_car_probe_states(),
                                 config.rl.step_cap);
  else
    tb.probe = make_td_probe_set(Acrobot(), acrobot_probe_states(config.rl.probe_seed), config.rl.step_cap);
  return tb;
}

namespace {

template <class Env>
RLRunResult run_rl_impl(const Env& env, const RlTestbed& tb, const OptimizerConfig& optimizer, std::uint64_t seed,
                        bool with_metrics) {
  const ExperimentConfig& cfg = tb.config;
  optimizer.validate();
  RLRunResult result;
  result.seed = seed;

  std::shared_ptr<const EvalStateSet> eval = tb.eval;
  if (!eval) eval = std::make_shared<const EvalStateSet>(rl_eval_set(cfg, seed));

  NetworkParams params = init_network(cfg.network, seed);
  OptimizerState state = OptimizerState::fresh(optimizer, params.size());
  Rng rng = make_rng(seed, Stream::env_reset);
  typename Env::State s{};

  auto observe = [&](auto&& fn) {
    ++result.diagnostics.metric_calls;
    if (!cfg.metrics.verify_purity) return fn();
    const Eigen::VectorXd params_before = params.values();
    const OptimizerState state_before = state;
    const Rng rng_before = rng;
    const typename Env::State s_before = s;
    auto value = fn();
    if (!same_bits(params_before, params.values()) || !(state_before == state) || !(rng_before == rng) ||
        !(s_before == s))
      ++result.diagnostics.purity_violations;
    return value;
  };

  try {
    for (std::size_t e = 1; e <= cfg.rl.episodes; ++e) {
      s = env.reset(rng);
      std::size_t len = 0;
      double loss_sum = 0.0;
      for (;;) {
        const auto r = env.step(s, Env::policy(s));
        const Gradients g = td0_gradient(params, Env::observe(s), r.reward, Env::observe(r.next), r.terminal);
        apply_update(optimizer, state, params, g,
                     to_string(optimizer.kind) + " seed " + std::to_string(seed) + " episode " + std::to_string(e));
        ++len;
        loss_sum += g.loss;
        s = r.next;
        if (r.terminal) break;
        if (len >= cfg.rl.step_cap)
          throw NonTerminatingPolicy("episode " + std::to_string(e) + " exceeded " + std::to_string(cfg.rl.step_cap) +
                                     " steps");
      }
      result.episode_lengths.push_back(len);

      MetricRecord rec;
      rec.index = e;
      rec.loss = loss_sum / static_cast<double>(len);
      rec.rmsve = observe([&] { return rmsve(params, *eval); });
      if (!std::isfinite(*rec.rmsve)) throw NumericalInstability("non-finite value error after episode " + std::to_string(e));
      if (with_metrics && cadence_due(cfg.metrics, e, 0)) {
        if (cfg.metrics.overlap) rec.overlap = observe([&] { return activation_overlap(params, tb.probe.inputs); });
        if (cfg.metrics.interference) {
          const InterferenceResult pi =
              observe([&] { return pairwise_interference(params, optimizer, state, make_td_probe(params, tb.probe)); });
          rec.interference = pi.mean;
          result.diagnostics.unstable_pairs += pi.unstable_pairs;
        }
      }
      result.records.push_back(rec);
    }
  } catch (const NumericalInstability& e) {
    result.status = RunStatus::numerical_instability;
    result.message = e.what();
  }
  return result;
}

template <class Result, class Fn>
std::vector<Result> run_jobs(std::size_t count, Fn&& fn) {
  std::vector<Result> out(count);
  std::exception_ptr failure;
  const int threads = std::max(1, std::min<int>(worker_count(), static_cast<int>(count)));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(fbench_job_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

RLRunResult run_rl(const RlTestbed& tb, const OptimizerConfig& optimizer, std::uint64_t seed, bool with_metrics) {
  if (tb.config.testbed == Testbed::mountain_car)
    return run_rl_impl(MountainCar(tb.config.rl.mc_literal_dynamics), tb, optimizer, seed, with_metrics);
  return run_rl_impl(Acrobot(), tb, optimizer, seed, with_metrics);
}

int worker_count() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("FB_WORKERS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) throw ConfigError("FB_WORKERS must be a positive integer");
    n = std::min<int>(n, static_cast<int>(cap));
  }
  return std::max(1, n);
}

std::vector<SupervisedRunResult> run_supervised_batch(const SupervisedTestbed& tb, const std::vector<RunJob>& jobs,
                                                      bool with_metrics) {
  return run_jobs<SupervisedRunResult>(jobs.size(), [&](std::size_t i) {
    return run_supervised(tb, jobs[i].optimizer, jobs[i].seed, with_metrics);
  });
}

std::vector<RLRunResult> run_rl_batch(const RlTestbed& tb, const std::vector<RunJob>& jobs, bool with_metrics) {
  return run_jobs<RLRunResult>(jobs.size(),
                               [&](std::size_t i) { return run_rl(tb, jobs[i].optimizer, jobs[i].seed, with_metrics); });
}

}  // namespace fb
