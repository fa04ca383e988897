#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doppel/matrix.hpp"
#include "doppel/rng.hpp"

namespace doppel {

/// Output nonlinearity. `relu` is only valid on hidden layers.
enum class Activation { identity, sigmoid, softmax, relu };

enum class LossKind { mse, binary_ce, categorical_ce, categorical_hinge };

enum class OptimizerKind { adam, nadam };

/// Probabilities entering a cross-entropy log are clipped to
/// [kProbabilityClip, 1 - kProbabilityClip].
inline constexpr double kProbabilityClip = 1e-7;

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(LossKind l) noexcept;
std::string_view to_string(OptimizerKind o) noexcept;
Activation parse_activation(std::string_view name);
LossKind parse_loss(std::string_view name);
OptimizerKind parse_optimizer(std::string_view name);

Matrix apply_activation(const Matrix& z, Activation act);

/// Backpropagates `grad_out` (dL/d output) through `act`, given the
/// activation's own output.
Matrix activation_backward(Activation act, const Matrix& out, const Matrix& grad_out);

/// act(x Wᵀ + b) with W stored [out × in].
Matrix dense_forward(const Matrix& weights, std::span<const double> bias, const Matrix& x,
                     Activation act);

/// Batch-mean loss. mse and binary_ce average over every element;
/// categorical losses average per row.
double loss_eval(LossKind kind, const Matrix& y_true, const Matrix& y_pred);

/// dL/dy_pred for the batch-mean loss above.
Matrix loss_gradient(LossKind kind, const Matrix& y_true, const Matrix& y_pred);

/// A named trainable tensor. `penalized` blocks receive the regularizer.
struct ParamBlock {
  std::string name;
  Matrix value;
  bool penalized = false;

  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::size_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Zeroed moment buffers shaped like `params`. Throws ConfigError when the
/// hyperparameters are outside (0,1) for the betas or epsilon <= 0.
OptimizerState make_optimizer(OptimizerKind kind, double learning_rate,
                              std::span<const ParamBlock> params, double beta1 = 0.9,
                              double beta2 = 0.999, double epsilon = 1e-7);

/// One bias-corrected Adam or Nadam update in place. Nadam applies the
/// Nesterov lookahead to the first moment:
///   m_hat = beta1 * m_t / (1 - beta1^(t+1)) + (1 - beta1) * g_t / (1 - beta1^t)
/// Non-finite gradients throw NumericError naming the block before any
/// parameter is touched.
void optimizer_step(OptimizerState& state, std::span<ParamBlock> params,
                    std::span<const Matrix> grads);

/// Uniform Glorot initialization in ±sqrt(6 / (fan_in + fan_out)), shaped
/// [fan_out × fan_in].
Matrix glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace doppel
