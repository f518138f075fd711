// Straightforward pair-by-pair metric loops. Slow, but each quantity is
// computed exactly as defined, one forward pass per (parameters, input).

#include <cmath>

#include "fbench/error.hpp"
#include "fbench/metrics.hpp"

namespace fb::reference {

double activation_overlap(const NetworkParams& params, const Eigen::MatrixXd& probe_inputs) {
  const Eigen::Index count = probe_inputs.cols();
  if (count < 2) throw UsageError("activation overlap needs at least 2 probe items");
  std::vector<Eigen::VectorXd> h;
  for (Eigen::Index i = 0; i < count; ++i) h.push_back(hidden_activations(params, probe_inputs.col(i)));
  const double n = static_cast<double>(params.spec().hidden_unit_count());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index a = 0; a < count; ++a)
    for (Eigen::Index b = a + 1; b < count; ++b) {
      double dot = 0.0;
      for (Eigen::Index k = 0; k < h[a].size(); ++k) dot += h[a](k) * h[b](k);
      sum += dot / n;
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

InterferenceResult pairwise_interference(const NetworkParams& params, const OptimizerConfig& config,
                                         const OptimizerState& state, const InterferenceProbe& probe) {
  const std::size_t count = probe.size();
  if (count < 2) throw UsageError("pairwise interference needs at least 2 probe items");
  auto target = [&](std::size_t a) -> Target {
    if (probe.objective == LossKind::cross_entropy) return ClassId{probe.units[a]};
    return probe.values(static_cast<Eigen::Index>(a));
  };
  auto input = [&](std::size_t a) -> Eigen::VectorXd { return probe.inputs.col(static_cast<Eigen::Index>(a)); };

  InterferenceResult result;
  double total = 0.0;
  for (std::size_t b = 0; b < count; ++b) {
    NetworkParams updated = params;
    try {
      updated = virtual_update(config, state, params, probe.update_grads[b]);
    } catch (const NumericalInstability&) {
      result.unstable_pairs += count - 1;
      continue;
    }
    for (std::size_t a = 0; a < count; ++a) {
      if (a == b) continue;
      const double delta = evaluate_loss(updated, input(a), target(a), probe.objective) -
                           evaluate_loss(params, input(a), target(a), probe.objective);
      if (!std::isfinite(delta)) {
        ++result.unstable_pairs;
        continue;
      }
      total += delta;
      ++result.pairs;
    }
  }
  result.mean = result.pairs > 0 ? total / static_cast<double>(result.pairs) : 0.0;
  return result;
}

double rmsve(const NetworkParams& params, const EvalStateSet& eval) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(eval.size()); ++i) {
    const double v = forward(params, eval.observations.col(i)).output()(0);
    const double e = v - eval.true_values(i);
    sum += eval.weights(i) * e * e;
  }
  return std::sqrt(sum);
}

}  // namespace fb::reference
