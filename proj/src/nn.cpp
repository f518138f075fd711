#include "fbench/nn.hpp"

#include <algorithm>
#include <cmath>

#include "fbench/error.hpp"
#include "fbench/random.hpp"

namespace fb {

namespace {

double relu(double x) { return x > 0.0 ? x : 0.0; }

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

double log_sum_exp(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  return shift + std::log((logits.array() - shift).exp().sum());
}

// Loss of the output layer given its pre-activation (logits or raw value).
double loss_from_logits(const Eigen::VectorXd& logits, const Target& target, LossKind kind) {
  if (kind == LossKind::cross_entropy) {
    const int label = std::get<ClassId>(target).value;
    return log_sum_exp(logits) - logits(label);
  }
  const double diff = logits(0) - std::get<double>(target);
  return diff * diff;
}

// L(theta + perturbation) - L(theta) when the perturbation moves one unit of
// layer `layer`'s pre-activation by `shift`. Differences are carried through
// the remaining layers directly, so small changes do not cancel against the
// full loss.
double loss_change(const NetworkParams& params, const ForwardTrace& base, std::size_t layer, Eigen::Index unit,
                   double shift, const Target& target, LossKind kind) {
  const std::size_t last = params.layer_count() - 1;
  auto relu_change = [](double pre, double d) {
    if (pre > 0.0 && pre + d > 0.0) return d;
    return relu(pre + d) - relu(pre);
  };
  Eigen::VectorXd dz;
  if (layer == last) {
    dz = Eigen::VectorXd::Zero(base.pre[last].size());
    dz(unit) = shift;
  } else {
    double d = relu_change(base.pre[layer](unit), shift);
    Eigen::VectorXd dpre = params.weights(layer + 1).col(unit) * d;
    for (std::size_t l = layer + 1; l < last; ++l) {
      Eigen::VectorXd dpost(dpre.size());
      for (Eigen::Index i = 0; i < dpre.size(); ++i) dpost(i) = relu_change(base.pre[l](i), dpre(i));
      dpre = params.weights(l + 1) * dpost;
    }
    dz = std::move(dpre);
  }
  if (kind == LossKind::cross_entropy) {
    // log sum p_i exp(dz_i) - dz_y with p the base softmax.
    const double sum = base.post[last].dot(dz.unaryExpr([](double v) { return std::expm1(v); }));
    return std::log1p(sum) - dz(std::get<ClassId>(target).value);
  }
  const double dy = dz(0);
  return dy * (2.0 * (base.pre[last](0) - std::get<double>(target)) + dy);
}

}  // namespace

std::size_t NetworkSpec::hidden_unit_count() const {
  std::size_t n = 0;
  for (std::size_t i = 1; i + 1 < layer_sizes.size(); ++i) n += layer_sizes[i];
  return n;
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i)
    n += layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1];
  return n;
}

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 3)
    throw ConfigError("network needs an input layer, at least one hidden layer and an output layer");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw ConfigError("network layer sizes must be positive");
  if (output_kind == OutputKind::softmax_classification && output_size() < 2)
    throw ConfigError("classification output needs at least 2 units");
  if (output_kind == OutputKind::scalar_value && output_size() != 1)
    throw ConfigError("scalar-value output must have exactly 1 unit");
  if (!(init_std >= 0.0) || !(bias_std >= 0.0) || !std::isfinite(init_mean))
    throw ConfigError("initialization parameters must be finite and standard deviations nonnegative");
}

NetworkSpec NetworkSpec::mnist() {
  return NetworkSpec{{784, 100, 4}, OutputKind::softmax_classification, InitScheme::gaussian};
}

NetworkSpec NetworkSpec::mountain_car() {
  return NetworkSpec{{2, 50, 1}, OutputKind::scalar_value, InitScheme::xavier};
}

NetworkSpec NetworkSpec::acrobot() {
  return NetworkSpec{{6, 32, 256, 1}, OutputKind::scalar_value, InitScheme::he};
}

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::gaussian: return "gaussian";
    case InitScheme::xavier: return "xavier";
    case InitScheme::he: return "he";
  }
  return "?";
}

InitScheme init_scheme_from_string(const std::string& name) {
  if (name == "gaussian") return InitScheme::gaussian;
  if (name == "xavier") return InitScheme::xavier;
  if (name == "he") return InitScheme::he;
  throw ConfigError("unknown init scheme '" + name + "'");
}

NetworkParams::NetworkParams(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec_.weight_layer_count(); ++l) {
    offsets_.push_back(offset);
    offset += spec_.layer_sizes[l] * spec_.layer_sizes[l + 1] + spec_.layer_sizes[l + 1];
  }
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

std::size_t NetworkParams::bias_offset(std::size_t layer) const {
  return offsets_[layer] + spec_.layer_sizes[layer] * spec_.layer_sizes[layer + 1];
}

NetworkParams::MatrixView NetworkParams::weights(std::size_t layer) {
  return MatrixView(values_.data() + offsets_[layer],
                    static_cast<Eigen::Index>(spec_.layer_sizes[layer + 1]),
                    static_cast<Eigen::Index>(spec_.layer_sizes[layer]));
}

NetworkParams::ConstMatrixView NetworkParams::weights(std::size_t layer) const {
  return ConstMatrixView(values_.data() + offsets_[layer],
                         static_cast<Eigen::Index>(spec_.layer_sizes[layer + 1]),
                         static_cast<Eigen::Index>(spec_.layer_sizes[layer]));
}

NetworkParams::VectorView NetworkParams::bias(std::size_t layer) {
  return VectorView(values_.data() + bias_offset(layer),
                    static_cast<Eigen::Index>(spec_.layer_sizes[layer + 1]));
}

NetworkParams::ConstVectorView NetworkParams::bias(std::size_t layer) const {
  return ConstVectorView(values_.data() + bias_offset(layer),
                         static_cast<Eigen::Index>(spec_.layer_sizes[layer + 1]));
}

NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkParams params(spec);
  Rng rng = make_rng(seed, Stream::init);
  std::normal_distribution<double> bias_dist(0.0, spec.bias_std);

  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    auto w = params.weights(l);
    const double fan_in = static_cast<double>(spec.layer_sizes[l]);
    const double fan_out = static_cast<double>(spec.layer_sizes[l + 1]);
    switch (spec.init_scheme) {
      case InitScheme::gaussian: {
        std::normal_distribution<double> dist(spec.init_mean, spec.init_std);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        auto b = params.bias(l);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = dist(rng);
        continue;
      }
      case InitScheme::xavier: {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        break;
      }
      case InitScheme::he: {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        break;
      }
    }
    auto b = params.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = bias_dist(rng);
  }
  return params;
}

ForwardTrace forward(const NetworkParams& params, const Eigen::VectorXd& input) {
  if (static_cast<std::size_t>(input.size()) != params.spec().input_size())
    throw ShapeError("input has " + std::to_string(input.size()) + " features, network expects " +
                     std::to_string(params.spec().input_size()));
  ForwardTrace trace;
  const std::size_t layers = params.layer_count();
  trace.pre.reserve(layers);
  trace.post.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::VectorXd& in = l == 0 ? input : trace.post.back();
    Eigen::VectorXd pre = params.weights(l) * in + params.bias(l);
    Eigen::VectorXd post;
    if (l + 1 < layers) {
      post = pre.unaryExpr(&relu);
    } else if (params.spec().output_kind == OutputKind::softmax_classification) {
      post = softmax(pre);
    } else {
      post = pre;
    }
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
  }
  return trace;
}

void check_loss_compatible(const NetworkSpec& spec, const Target& target, LossKind kind) {
  if (kind == LossKind::cross_entropy) {
    if (spec.output_kind != OutputKind::softmax_classification)
      throw ConfigError("cross-entropy loss requires a classification output");
    if (!std::holds_alternative<ClassId>(target))
      throw ConfigError("cross-entropy loss requires a class-id target");
    const int label = std::get<ClassId>(target).value;
    if (label < 0 || static_cast<std::size_t>(label) >= spec.output_size())
      throw ConfigError("class id " + std::to_string(label) + " outside the output layer");
  } else {
    if (spec.output_kind != OutputKind::scalar_value)
      throw ConfigError("squared-error loss requires a scalar-value output");
    if (!std::holds_alternative<double>(target))
      throw ConfigError("squared-error loss requires a scalar target");
  }
}

double evaluate_loss(const NetworkParams& params, const Eigen::VectorXd& input,
                     const Target& target, LossKind kind) {
  check_loss_compatible(params.spec(), target, kind);
  const ForwardTrace trace = forward(params, input);
  return loss_from_logits(trace.pre.back(), target, kind);
}

Gradients loss_and_gradient(const NetworkParams& params, const Eigen::VectorXd& input,
                            const Target& target, LossKind kind) {
  check_loss_compatible(params.spec(), target, kind);
  const ForwardTrace trace = forward(params, input);
  const std::size_t layers = params.layer_count();

  Gradients grads;
  grads.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  grads.loss = loss_from_logits(trace.pre.back(), target, kind);

  Eigen::VectorXd delta;
  if (kind == LossKind::cross_entropy) {
    delta = trace.post.back();
    delta(std::get<ClassId>(target).value) -= 1.0;
  } else {
    delta = Eigen::VectorXd::Constant(1, 2.0 * (trace.post.back()(0) - std::get<double>(target)));
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::VectorXd& in = l == 0 ? input : trace.post[l - 1];
    const auto rows = static_cast<Eigen::Index>(params.spec().layer_sizes[l + 1]);
    const auto cols = static_cast<Eigen::Index>(params.spec().layer_sizes[l]);
    Eigen::Map<Eigen::MatrixXd>(grads.values.data() + params.weight_offset(l), rows, cols).noalias() =
        delta * in.transpose();
    Eigen::Map<Eigen::VectorXd>(grads.values.data() + params.bias_offset(l), rows) = delta;
    if (l > 0) {
      Eigen::VectorXd back = params.weights(l).transpose() * delta;
      const Eigen::VectorXd& pre = trace.pre[l - 1];
      for (Eigen::Index i = 0; i < back.size(); ++i)
        if (!(pre(i) > 0.0)) back(i) = 0.0;
      delta = std::move(back);
    }
  }
  return grads;
}

Eigen::VectorXd hidden_activations(const NetworkParams& params, const Eigen::VectorXd& input) {
  const ForwardTrace trace = forward(params, input);
  Eigen::VectorXd out(static_cast<Eigen::Index>(params.spec().hidden_unit_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l + 1 < params.layer_count(); ++l) {
    out.segment(at, trace.post[l].size()) = trace.post[l];
    at += trace.post[l].size();
  }
  return out;
}

double finite_difference_check(const NetworkParams& params, const Eigen::VectorXd& input,
                               const Target& target, LossKind kind) {
  return finite_difference_check(params, input, target, kind,
                                 loss_and_gradient(params, input, target, kind));
}

double finite_difference_check(const NetworkParams& params, const Eigen::VectorXd& input,
                               const Target& target, LossKind kind, const Gradients& analytic) {
  check_loss_compatible(params.spec(), target, kind);
  if (analytic.values.size() != static_cast<Eigen::Index>(params.size()))
    throw ShapeError("gradient size does not match parameter count");

  // A parameter of layer l only affects one unit of layer l's pre-activation:
  // a weight by h * input, a bias by h.
  const ForwardTrace base = forward(params, input);
  const double h = kFiniteDifferenceStep;
  double worst = 0.0;

  auto probe = [&](std::size_t l, Eigen::Index unit, double in, std::size_t flat) {
    const double up = loss_change(params, base, l, unit, h * in, target, kind);
    const double down = loss_change(params, base, l, unit, -h * in, target, kind);
    const double numeric = (up - down) / (2.0 * h);
    const double exact = analytic.values(static_cast<Eigen::Index>(flat));
    const double err = std::abs(exact - numeric) / std::max(1e-12, std::abs(exact) + std::abs(numeric));
    worst = std::max(worst, err);
  };

  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const Eigen::VectorXd& in = l == 0 ? input : base.post[l - 1];
    const auto rows = static_cast<Eigen::Index>(params.spec().layer_sizes[l + 1]);
    for (Eigen::Index col = 0; col < in.size(); ++col)
      for (Eigen::Index row = 0; row < rows; ++row)
        probe(l, row, in(col), params.weight_offset(l) + static_cast<std::size_t>(col * rows + row));
    for (Eigen::Index row = 0; row < rows; ++row)
      probe(l, row, 1.0, params.bias_offset(l) + static_cast<std::size_t>(row));
  }
  return worst;
}

Gradients td0_gradient(const NetworkParams& params, const Eigen::VectorXd& observation, double reward,
                       const Eigen::VectorXd& next_observation, bool terminal) {
  const double target = terminal ? reward : reward + forward(params, next_observation).output()(0);
  return loss_and_gradient(params, observation, Target{target}, LossKind::squared_error);
}

BatchOutput forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                          bool keep_hidden) {
  if (static_cast<std::size_t>(inputs.rows()) != params.spec().input_size())
    throw ShapeError("batch rows do not match the network input size");
  BatchOutput out;
  if (keep_hidden)
    out.hidden.resize(static_cast<Eigen::Index>(params.spec().hidden_unit_count()), inputs.cols());
  Eigen::MatrixXd act = inputs;
  Eigen::Index hidden_row = 0;
  const std::size_t layers = params.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd pre = params.weights(l) * act;
    pre.colwise() += params.bias(l);
    if (l + 1 < layers) {
      act = pre.cwiseMax(0.0);
      if (keep_hidden) {
        out.hidden.middleRows(hidden_row, act.rows()) = act;
        hidden_row += act.rows();
      }
    } else {
      act = std::move(pre);
    }
  }
  out.output = std::move(act);  // logits for classification, values otherwise
  return out;
}

int argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

}  // namespace fb
