#pragma once

// Small fully connected networks trained one example at a time.
//
// Parameters of every layer live in one contiguous vector so optimizers can
// treat the whole network as a flat array; per-layer matrices are views into
// it. Layer l stores its weight matrix (out x in, column-major) followed by
// its bias vector.

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace fb {

enum class OutputKind { softmax_classification, scalar_value };
enum class InitScheme { gaussian, xavier, he };
enum class LossKind { cross_entropy, squared_error };

struct NetworkSpec {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  OutputKind output_kind = OutputKind::softmax_classification;
  InitScheme init_scheme = InitScheme::gaussian;
  double init_mean = 0.0;
  double init_std = 0.1;
  double bias_std = 0.1;

  // Throws ConfigError.
  void validate() const;

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t weight_layer_count() const { return layer_sizes.size() - 1; }
  std::size_t hidden_unit_count() const;
  std::size_t parameter_count() const;

  static NetworkSpec mnist();         // 784-100-4, gaussian init
  static NetworkSpec mountain_car();  // 2-50-1, xavier
  static NetworkSpec acrobot();       // 6-32-256-1, he
};

std::string to_string(InitScheme scheme);
InitScheme init_scheme_from_string(const std::string& name);

class NetworkParams {
 public:
  using MatrixView = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixView = Eigen::Map<const Eigen::MatrixXd>;
  using VectorView = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

  // All-zero parameters for a validated spec.
  explicit NetworkParams(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return spec_.weight_layer_count(); }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  MatrixView weights(std::size_t layer);
  ConstMatrixView weights(std::size_t layer) const;
  VectorView bias(std::size_t layer);
  ConstVectorView bias(std::size_t layer) const;

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  // Flat offsets of layer l's weight block and bias block.
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const;

  bool all_finite() const { return values_.allFinite(); }

 private:
  NetworkSpec spec_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd values_;
};

// Same layout as NetworkParams::values().
struct Gradients {
  Eigen::VectorXd values;
  double loss = 0.0;
};

struct ClassId {
  int value = 0;
};
using Target = std::variant<ClassId, double>;

struct ForwardTrace {
  // One entry per weight layer; the last entry is the output layer, whose
  // post-activation is the softmax (classification) or identity (value).
  std::vector<Eigen::VectorXd> pre;
  std::vector<Eigen::VectorXd> post;

  const Eigen::VectorXd& output() const { return post.back(); }
};

NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed);

ForwardTrace forward(const NetworkParams& params, const Eigen::VectorXd& input);

double evaluate_loss(const NetworkParams& params, const Eigen::VectorXd& input,
                     const Target& target, LossKind kind);

Gradients loss_and_gradient(const NetworkParams& params, const Eigen::VectorXd& input,
                            const Target& target, LossKind kind);

// Concatenated post-activations of every hidden layer (layer-major).
Eigen::VectorXd hidden_activations(const NetworkParams& params, const Eigen::VectorXd& input);

// Max over parameters of |analytic - numeric| / max(1e-12, |analytic| + |numeric|)
// with central differences of step 1e-5.
double finite_difference_check(const NetworkParams& params, const Eigen::VectorXd& input,
                               const Target& target, LossKind kind);
double finite_difference_check(const NetworkParams& params, const Eigen::VectorXd& input,
                               const Target& target, LossKind kind, const Gradients& analytic);

inline constexpr double kFiniteDifferenceStep = 1e-5;

// Semi-gradient TD(0) on one transition: squared error against the target
// r + v(next) (just r when terminal), the target held constant.
Gradients td0_gradient(const NetworkParams& params, const Eigen::VectorXd& observation, double reward,
                       const Eigen::VectorXd& next_observation, bool terminal);

// Column-batched evaluation: inputs is (input_size x count).
struct BatchOutput {
  Eigen::MatrixXd output;  // (output_size x count); logits for classification
  Eigen::MatrixXd hidden;  // (hidden_unit_count x count); empty unless requested
};
BatchOutput forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                          bool keep_hidden = false);

int argmax(const Eigen::VectorXd& v);  // lowest index wins ties

// Throws ConfigError when the loss cannot be applied to the network's output.
void check_loss_compatible(const NetworkSpec& spec, const Target& target, LossKind kind);

}  // namespace fb
