#include "fbench/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fbench/error.hpp"

namespace fb {

namespace {

// Shared element-wise rule. With Commit the moment buffers are written back;
// without it they are only read, which is what a virtual update needs. Both
// paths evaluate identical expressions so their parameters agree bitwise.
template <bool Commit>
void update_kernel(const OptimizerConfig& c, const double* first, const double* second,
                   double* first_out, double* second_out, std::uint64_t next_step,
                   const double* theta, const double* g, double* out, Eigen::Index n) {
  switch (c.kind) {
    case OptimizerKind::sgd:
      for (Eigen::Index i = 0; i < n; ++i) out[i] = theta[i] - c.alpha * g[i];
      break;
    case OptimizerKind::momentum:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double b = c.mu * first[i] + g[i];
        if constexpr (Commit) first_out[i] = b;
        out[i] = theta[i] - c.alpha * b;
      }
      break;
    case OptimizerKind::rmsprop:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = c.rho * second[i] + (1.0 - c.rho) * g[i] * g[i];
        if constexpr (Commit) second_out[i] = v;
        out[i] = theta[i] - c.alpha * g[i] / (std::sqrt(v) + c.epsilon);
      }
      break;
    case OptimizerKind::adam: {
      const double t = static_cast<double>(next_step);
      const double c1 = 1.0 - std::pow(c.beta1, t);
      const double c2 = 1.0 - std::pow(c.beta2, t);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = c.beta1 * first[i] + (1.0 - c.beta1) * g[i];
        const double v = c.beta2 * second[i] + (1.0 - c.beta2) * g[i] * g[i];
        if constexpr (Commit) {
          first_out[i] = m;
          second_out[i] = v;
        }
        out[i] = theta[i] - c.alpha * (m / c1) / (std::sqrt(v / c2) + c.epsilon);
      }
      break;
    }
  }
}

void check_shapes(const OptimizerConfig& config, const OptimizerState& state,
                  const NetworkParams& params, const Gradients& grads) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (grads.values.size() != n) throw ShapeError("gradient size does not match parameter count");
  const bool needs_first = config.kind == OptimizerKind::momentum || config.kind == OptimizerKind::adam;
  const bool needs_second = config.kind == OptimizerKind::rmsprop || config.kind == OptimizerKind::adam;
  if (needs_first && state.first_moment.size() != n)
    throw ShapeError("first-moment buffer does not match parameter count");
  if (needs_second && state.second_moment.size() != n)
    throw ShapeError("second-moment buffer does not match parameter count");
}

void check_gradient(const Gradients& grads, const std::string& context) {
  if (!grads.values.allFinite() || !std::isfinite(grads.loss))
    throw NumericalInstability((context.empty() ? "" : context + ": ") + "non-finite gradient");
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::momentum: return "momentum";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "momentum") return OptimizerKind::momentum;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

void OptimizerConfig::validate() const {
  auto unit = [](double x) { return x >= 0.0 && x < 1.0; };
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and nonnegative");
  if (!unit(mu)) throw ConfigError("mu must lie in [0, 1)");
  if (!unit(rho)) throw ConfigError("rho must lie in [0, 1)");
  if (!unit(beta1) || !unit(beta2)) throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

OptimizerState OptimizerState::fresh(const OptimizerConfig& config, std::size_t parameter_count) {
  OptimizerState state;
  const auto n = static_cast<Eigen::Index>(parameter_count);
  if (config.kind == OptimizerKind::momentum || config.kind == OptimizerKind::adam)
    state.first_moment = Eigen::VectorXd::Zero(n);
  if (config.kind == OptimizerKind::rmsprop || config.kind == OptimizerKind::adam)
    state.second_moment = Eigen::VectorXd::Zero(n);
  return state;
}

bool OptimizerState::operator==(const OptimizerState& other) const {
  auto same = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() &&
           std::equal(a.data(), a.data() + a.size(), b.data(), [](double x, double y) {
             return std::memcmp(&x, &y, sizeof(double)) == 0;
           });
  };
  return step == other.step && same(first_moment, other.first_moment) &&
         same(second_moment, other.second_moment);
}

void apply_update(const OptimizerConfig& config, OptimizerState& state, NetworkParams& params,
                  const Gradients& grads, const std::string& context) {
  check_shapes(config, state, params, grads);
  check_gradient(grads, context);
  Eigen::VectorXd& theta = params.values();
  update_kernel<true>(config, state.first_moment.data(), state.second_moment.data(),
                      state.first_moment.data(), state.second_moment.data(), state.step + 1,
                      theta.data(), grads.values.data(), theta.data(), theta.size());
  ++state.step;
  if (!params.all_finite())
    throw NumericalInstability((context.empty() ? "" : context + ": ") +
                               "non-finite parameters after update");
}

void virtual_update(const OptimizerConfig& config, const OptimizerState& state,
                    const NetworkParams& params, const Gradients& grads, NetworkParams& out) {
  check_shapes(config, state, params, grads);
  check_gradient(grads, {});
  if (out.size() != params.size()) throw ShapeError("virtual update target has the wrong size");
  update_kernel<false>(config, state.first_moment.data(), state.second_moment.data(), nullptr,
                       nullptr, state.step + 1, params.values().data(), grads.values.data(),
                       out.values().data(), params.values().size());
  if (!out.all_finite()) throw NumericalInstability("non-finite parameters after virtual update");
}

NetworkParams virtual_update(const OptimizerConfig& config, const OptimizerState& state,
                             const NetworkParams& params, const Gradients& grads) {
  NetworkParams out = params;
  virtual_update(config, state, params, grads, out);
  return out;
}

}  // namespace fb
