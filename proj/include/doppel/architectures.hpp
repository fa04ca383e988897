#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "doppel/data.hpp"
#include "doppel/network.hpp"
#include "doppel/primal.hpp"

namespace doppel {

struct DataShape {
  std::size_t rows = 0;
  std::size_t features = 0;
  /// 0 for regression.
  std::size_t classes = 0;
};

enum class AdapterKind { classifier, regressor };
std::string_view to_string(AdapterKind k) noexcept;

/// Shape-free proxy template: a registry entry's declarative architecture,
/// bound to concrete widths by `instantiate`.
struct ArchitectureTemplate {
  enum class Shape { glm, dndt, mlp };

  std::string name;
  Shape shape = Shape::glm;
  Activation activation = Activation::identity;
  LossKind loss = LossKind::mse;
  Regularizer::Kind regularizer = Regularizer::Kind::none;
  MappingStrategy strategy = MappingStrategy::exact;
  std::map<std::string, std::vector<ParamValue>> searchable;

  friend bool operator==(const ArchitectureTemplate&, const ArchitectureTemplate&) = default;
};

/// The template shipped for each registered estimator key.
ArchitectureTemplate builtin_template(const RegistryKey& key);

/// Binds a template to data. Overrides understood: alpha, l1_ratio (GLM
/// regularizers), cut_points and temperature (DNDT), hidden_units and
/// hidden_layers (MLP).
ProxyDescriptor instantiate(const ArchitectureTemplate& templ, DataShape shape,
                            const ParamMap& overrides = {});

ProxyDescriptor resolve_architecture(const RegistryKey& key, DataShape shape,
                                     const ParamMap& overrides = {});

/// Rebuilds a descriptor with architecture parameters replaced: alpha and
/// l1_ratio on regularized proxies, cut_points and temperature on
/// differentiable trees, hidden_units and hidden_layers on MLPs.
ProxyDescriptor with_params(const ProxyDescriptor& desc, const ParamMap& params);

/// Names `with_params` accepts for this descriptor.
std::vector<std::string> architecture_param_names(const ProxyDescriptor& desc);

/// Primal hyperparameters that carry over to the proxy (regularizer α, ρ).
ParamMap proxy_overrides_from(const PrimalModel& primal);

/// Weight copy for the exact semantic map. Binary logistic models expand
/// to a two-way softmax with logit rows (−w/2, +w/2) and biases likewise.
std::vector<ParamBlock> transfer_exact(const PrimalModel& primal, const ProxyDescriptor& proxy);

/// Differentiable tree parameters in textbook orientation: cut points
/// [features × cuts] and leaf weights [leaves × classes].
struct DndtSpec {
  std::size_t cut_points_per_feature = 1;
  double temperature = 0.1;
  Matrix cut_points;
  Matrix leaf_weights;
  std::vector<double> leaf_bias;

  std::size_t leaf_count() const noexcept { return leaf_weights.rows(); }
};

DndtSpec dndt_spec_from(const ProxyDescriptor& desc, std::span<const ParamBlock> weights);

/// Class probabilities of a differentiable decision tree.
Matrix dndt_forward(const DndtSpec& spec, const Matrix& x);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainedProxy {
  ProxyDescriptor descriptor;
  std::vector<ParamBlock> weights;
  std::vector<double> history;
  bool diverged = false;

  Matrix forward(const Matrix& X) const { return proxy_forward(descriptor, weights, X); }
};

/// Mini-batch training from a fresh seeded initialization. Regression heads
/// are trained on standardized targets and the scaling is folded back into
/// the output layer, so the returned weights predict on the original scale.
TrainedProxy train_proxy(const ProxyDescriptor& desc, const Matrix& X, const Matrix& targets,
                         const TrainConfig& config);

/// The teacher signal for the approximate map: class probabilities when
/// the family has them, one-hot predicted labels for other classifiers,
/// predicted values for regressors.
Matrix distillation_targets(const PrimalModel& primal, const Matrix& X);

/// Ground-truth targets in proxy layout (one-hot for classifiers).
Matrix encode_targets(const std::vector<double>& y, Task task, std::size_t classes);

TrainedProxy distill(const PrimalModel& primal, const ProxyDescriptor& proxy, const Matrix& X,
                     const TrainConfig& config);

/// Multilayer perceptron with ReLU hidden layers and a task head
/// (softmax + categorical cross-entropy, or identity + mse).
ProxyDescriptor universal_proxy(DataShape shape, const std::vector<std::size_t>& hidden_layers);

/// Classifier labels (argmax, lowest index on ties) or the single regression
/// output column.
std::vector<double> decode_outputs(const Matrix& outputs, bool classifier);

}  // namespace doppel
