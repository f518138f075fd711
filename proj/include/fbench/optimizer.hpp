#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "fbench/nn.hpp"

namespace fb {

enum class OptimizerKind { sgd, momentum, rmsprop, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double alpha = 0.01;
  double mu = 0.9;     // momentum
  double rho = 0.999;  // RMSProp moving-average coefficient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;  // throws ConfigError
};

// Moment buffers are empty for plain SGD. `step` counts applied updates.
struct OptimizerState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::uint64_t step = 0;

  static OptimizerState fresh(const OptimizerConfig& config, std::size_t parameter_count);

  bool operator==(const OptimizerState& other) const;
};

// One in-place update. Throws NumericalInstability on a non-finite gradient
// (before touching anything) or non-finite resulting parameters, and
// ShapeError when buffers and parameters disagree in size. `context` is
// prepended to the instability message.
void apply_update(const OptimizerConfig& config, OptimizerState& state, NetworkParams& params,
                  const Gradients& grads, const std::string& context = {});

// The parameters apply_update would produce, written to `out`; state and
// params are left untouched. `out` must share params' spec.
void virtual_update(const OptimizerConfig& config, const OptimizerState& state,
                    const NetworkParams& params, const Gradients& grads, NetworkParams& out);
NetworkParams virtual_update(const OptimizerConfig& config, const OptimizerState& state,
                             const NetworkParams& params, const Gradients& grads);

}  // namespace fb
