#include "fbench/metrics.hpp"

#include <cmath>

#include <omp.h>

#include "fbench/error.hpp"

namespace fb {

namespace {

void require_pairs(std::size_t count, const char* what) {
  if (count < 2) throw UsageError(std::string(what) + " needs at least 2 probe items");
}

void check_probe(const NetworkParams& params, const InterferenceProbe& probe) {
  require_pairs(probe.size(), "pairwise interference");
  if (probe.update_grads.size() != probe.size())
    throw ShapeError("interference probe needs one update gradient per item");
  if (probe.objective == LossKind::cross_entropy && probe.units.size() != probe.size())
    throw ShapeError("interference probe needs one class per item");
  if (probe.objective == LossKind::squared_error && static_cast<std::size_t>(probe.values.size()) != probe.size())
    throw ShapeError("interference probe needs one target value per item");
  for (const auto& g : probe.update_grads)
    if (g.values.size() != static_cast<Eigen::Index>(params.size()))
      throw ShapeError("update gradient does not match parameter count");
}

}  // namespace

double retention_accuracy(const NetworkParams& params, const LabeledBatch& eval) {
  if (eval.size() == 0) throw UsageError("retention needs a nonempty evaluation set");
  const BatchOutput out = forward_batch(params, eval.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < eval.size(); ++i)
    if (argmax(out.output.col(static_cast<Eigen::Index>(i))) == eval.units[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(eval.size());
}

std::optional<double> relearning_score(std::span<const std::size_t> completed_phase_lengths) {
  if (completed_phase_lengths.size() < 3 || completed_phase_lengths[0] == 0 || completed_phase_lengths[2] == 0)
    return std::nullopt;
  return static_cast<double>(completed_phase_lengths[0]) / static_cast<double>(completed_phase_lengths[2]);
}

double activation_overlap(const NetworkParams& params, const Eigen::MatrixXd& probe_inputs) {
  const auto count = static_cast<std::size_t>(probe_inputs.cols());
  require_pairs(count, "activation overlap");
  const Eigen::MatrixXd hidden = forward_batch(params, probe_inputs, true).hidden;
  // Sum over unordered pairs of <h_a, h_b> = (|sum h|^2 - sum |h|^2) / 2.
  const Eigen::VectorXd total = hidden.rowwise().sum();
  const double cross = 0.5 * (total.squaredNorm() - hidden.squaredNorm());
  const double pairs = 0.5 * static_cast<double>(count) * static_cast<double>(count - 1);
  return std::max(0.0, cross) / pairs / static_cast<double>(hidden.rows());
}

Eigen::VectorXd objective_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs, LossKind kind,
                                std::span<const int> units, const Eigen::VectorXd& values) {
  const Eigen::MatrixXd out = forward_batch(params, inputs).output;
  Eigen::VectorXd j(out.cols());
  if (kind == LossKind::cross_entropy) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double shift = out.col(c).maxCoeff();
      const double lse = shift + std::log((out.col(c).array() - shift).exp().sum());
      j(c) = lse - out(units[static_cast<std::size_t>(c)], c);
    }
  } else {
    j = (out.row(0).transpose() - values).array().square();
  }
  return j;
}

InterferenceProbe make_supervised_probe(const NetworkParams& params, const LabeledBatch& probe) {
  InterferenceProbe out;
  out.inputs = probe.inputs;
  out.objective = LossKind::cross_entropy;
  out.units = probe.units;
  out.update_grads.reserve(probe.size());
  for (std::size_t b = 0; b < probe.size(); ++b)
    out.update_grads.push_back(loss_and_gradient(params, probe.inputs.col(static_cast<Eigen::Index>(b)),
                                                 ClassId{probe.units[b]}, LossKind::cross_entropy));
  return out;
}

InterferenceProbe make_td_probe(const NetworkParams& params, const TdProbeSet& probe) {
  InterferenceProbe out;
  out.inputs = probe.inputs;
  out.objective = LossKind::squared_error;
  out.values = probe.true_values;
  out.update_grads.reserve(probe.size());
  for (std::size_t b = 0; b < probe.size(); ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    out.update_grads.push_back(
        td0_gradient(params, probe.inputs.col(i), probe.rewards(i), probe.next_inputs.col(i), probe.terminal[b]));
  }
  return out;
}

InterferenceResult pairwise_interference(const NetworkParams& params, const OptimizerConfig& config,
                                         const OptimizerState& state, const InterferenceProbe& probe) {
  check_probe(params, probe);
  const std::size_t count = probe.size();
  const Eigen::VectorXd before = objective_batch(params, probe.inputs, probe.objective, probe.units, probe.values);

  // Per-sample partial sums, reduced serially afterwards so the result does
  // not depend on the thread count.
  std::vector<double> sums(count, 0.0);
  std::vector<std::size_t> stable(count, 0);

#pragma omp parallel
  {
    NetworkParams work = params;
#pragma omp for schedule(dynamic)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(count); ++bi) {
      const auto b = static_cast<std::size_t>(bi);
      bool ok = true;
      try {
        virtual_update(config, state, params, probe.update_grads[b], work);
      } catch (const NumericalInstability&) {
        ok = false;
      }
      if (!ok) continue;
      const Eigen::VectorXd after = objective_batch(work, probe.inputs, probe.objective, probe.units, probe.values);
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t a = 0; a < count; ++a) {
        if (a == b) continue;
        const double delta = after(static_cast<Eigen::Index>(a)) - before(static_cast<Eigen::Index>(a));
        if (!std::isfinite(delta)) continue;
        sum += delta;
        ++n;
      }
      sums[b] = sum;
      stable[b] = n;
    }
  }

  InterferenceResult result;
  double total = 0.0;
  for (std::size_t b = 0; b < count; ++b) {
    total += sums[b];
    result.pairs += stable[b];
  }
  result.unstable_pairs = count * (count - 1) - result.pairs;
  result.mean = result.pairs > 0 ? total / static_cast<double>(result.pairs) : 0.0;
  return result;
}

double rmsve(const NetworkParams& params, const EvalStateSet& eval) {
  const Eigen::MatrixXd out = forward_batch(params, eval.observations).output;
  const Eigen::VectorXd err = out.row(0).transpose() - eval.true_values;
  return std::sqrt(eval.weights.dot(err.cwiseAbs2()));
}

}  // namespace fb
