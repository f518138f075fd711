#pragma once

// Forgetting metrics. Every function here only reads the learner's
// parameters and optimizer state.
//
// activation_overlap and pairwise_interference are the hot kernels: the
// versions in this namespace batch the probe set through GEMMs and spread the
// per-sample virtual updates over OpenMP threads. fb::reference holds plain
// pair-by-pair loops used as the test oracle and the benchmark baseline.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbench/environment.hpp"
#include "fbench/nn.hpp"
#include "fbench/optimizer.hpp"

namespace fb {

// Probe examples with their output-unit labels.
struct LabeledBatch {
  Eigen::MatrixXd inputs;   // (input_size x count)
  std::vector<int> units;   // output unit per column

  std::size_t size() const { return units.size(); }
};

// Fraction of columns whose argmax output matches their unit. Throws
// UsageError on an empty batch.
double retention_accuracy(const NetworkParams& params, const LabeledBatch& eval);

// phase1 / phase3; nullopt unless both phases completed.
std::optional<double> relearning_score(std::span<const std::size_t> completed_phase_lengths);

// Mean over unordered distinct pairs of (1/n) * <h(a), h(b)>, n the hidden
// unit count. Throws UsageError for fewer than 2 probes.
double activation_overlap(const NetworkParams& params, const Eigen::MatrixXd& probe_inputs);

// Everything pairwise interference needs about a probe set: where J is
// evaluated and which gradient each probe contributes as the update sample.
struct InterferenceProbe {
  Eigen::MatrixXd inputs;              // (input_size x count)
  LossKind objective = LossKind::cross_entropy;
  std::vector<int> units;              // cross-entropy targets
  Eigen::VectorXd values;              // squared-error targets
  std::vector<Gradients> update_grads; // gradient the learner would apply for sample b

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

struct InterferenceResult {
  double mean = 0.0;              // over stable ordered pairs
  std::size_t pairs = 0;          // stable ordered pairs averaged
  std::size_t unstable_pairs = 0; // excluded after a non-finite virtual update
};

// Supervised probe: J is cross-entropy, updates are cross-entropy gradients.
InterferenceProbe make_supervised_probe(const NetworkParams& params, const LabeledBatch& probe);

// RL probe states with one policy step each and cached true values.
struct TdProbeSet {
  Eigen::MatrixXd inputs;       // observation of each probe state b
  Eigen::MatrixXd next_inputs;  // observation after one policy step from b
  Eigen::VectorXd rewards;
  std::vector<bool> terminal;
  Eigen::VectorXd true_values;  // v_pi of each probe state

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

template <class Env>
TdProbeSet make_td_probe_set(const Env& env, const std::vector<typename Env::State>& states,
                             std::size_t cap = kDefaultStepCap) {
  TdProbeSet out;
  const auto n = static_cast<Eigen::Index>(states.size());
  const auto d = static_cast<Eigen::Index>(Env::observation_size);
  out.inputs.resize(d, n);
  out.next_inputs.resize(d, n);
  out.rewards.resize(n);
  out.true_values.resize(n);
  out.terminal.resize(states.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = states[static_cast<std::size_t>(i)];
    const auto r = env.step(s, Env::policy(s));
    out.inputs.col(i) = Env::observe(s);
    out.next_inputs.col(i) = Env::observe(r.next);
    out.rewards(i) = r.reward;
    out.terminal[static_cast<std::size_t>(i)] = r.terminal;
    out.true_values(i) = true_value(env, s, cap);
  }
  return out;
}

// RL probe: J is squared value error against true values, updates are
// semi-gradient TD(0) steps on each probe's transition.
InterferenceProbe make_td_probe(const NetworkParams& params, const TdProbeSet& probe);

// Mean over ordered pairs a != b of J(theta'_b; a) - J(theta; a), theta'_b
// being the virtual update from b's gradient with the learner's current
// optimizer state. Throws UsageError for fewer than 2 probes.
InterferenceResult pairwise_interference(const NetworkParams& params, const OptimizerConfig& config,
                                         const OptimizerState& state, const InterferenceProbe& probe);

// sqrt(sum_s d(s) (v_hat(s) - v(s))^2)
double rmsve(const NetworkParams& params, const EvalStateSet& eval);

// Per-column objective: cross-entropy against `units` or squared error
// against `values`.
Eigen::VectorXd objective_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                                LossKind kind, std::span<const int> units, const Eigen::VectorXd& values);

namespace reference {

double activation_overlap(const NetworkParams& params, const Eigen::MatrixXd& probe_inputs);

InterferenceResult pairwise_interference(const NetworkParams& params, const OptimizerConfig& config,
                                         const OptimizerState& state, const InterferenceProbe& probe);

double rmsve(const NetworkParams& params, const EvalStateSet& eval);

}  // namespace reference

}  // namespace fb
