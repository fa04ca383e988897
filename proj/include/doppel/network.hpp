#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "doppel/matrix.hpp"
#include "doppel/numcore.hpp"
#include "doppel/rng.hpp"

namespace doppel {

enum class MappingStrategy { exact, approximate, universal };

std::string_view to_string(MappingStrategy s) noexcept;
MappingStrategy parse_strategy(std::string_view name);

/// A searchable or overridable setting: numbers and names (optimizer kinds).
using ParamValue = std::variant<double, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

std::string to_string(const ParamValue& v);
double as_number(const ParamValue& v, std::string_view param);
const std::string& as_text(const ParamValue& v, std::string_view param);

enum class LayerKind { dense, soft_binning };

/// One layer of a proxy. Dense layers map `inputs` to `outputs` and apply
/// `activation` unless they are the head, whose activation comes from the
/// descriptor. A soft-binning layer maps d features to Π(cuts + 1) leaves.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  Activation activation = Activation::identity;
  std::size_t cuts_per_feature = 1;
  double temperature = 0.1;

  static LayerSpec dense(std::size_t in, std::size_t out, Activation hidden = Activation::identity);
  static LayerSpec soft_binning(std::size_t features, std::size_t cuts, double temperature);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Regularizer {
  enum class Kind { none, l1, l2, elastic };
  Kind kind = Kind::none;
  double alpha = 0.0;
  double rho = 0.5;

  /// α(ρ‖w‖₁ + (1−ρ)/2 ‖w‖²) with ρ pinned to 1 for l1 and 0 for l2.
  double penalty(std::span<const double> w) const;
  void add_gradient(std::span<const double> w, std::span<double> grad) const;

  friend bool operator==(const Regularizer&, const Regularizer&) = default;
};

std::string_view to_string(Regularizer::Kind k) noexcept;
Regularizer::Kind parse_regularizer(std::string_view name);

/// Declarative, shape-bound proxy architecture. Construction validates
/// activation/loss compatibility and layer shape chaining, so an invalid
/// descriptor cannot exist.
class ProxyDescriptor {
 public:
  ProxyDescriptor(std::string name, std::vector<LayerSpec> layers, Activation activation,
                  LossKind loss, Regularizer regularizer, MappingStrategy strategy,
                  std::string version = "default",
                  std::map<std::string, std::vector<ParamValue>> searchable = {});

  const std::string& name() const noexcept { return name_; }
  const std::string& version() const noexcept { return version_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  Activation activation() const noexcept { return activation_; }
  LossKind loss() const noexcept { return loss_; }
  const Regularizer& regularizer() const noexcept { return regularizer_; }
  MappingStrategy strategy() const noexcept { return strategy_; }
  const std::map<std::string, std::vector<ParamValue>>& searchable_params() const noexcept {
    return searchable_;
  }

  std::size_t input_width() const noexcept { return layers_.front().inputs; }
  std::size_t output_width() const noexcept { return layers_.back().outputs; }
  bool is_classifier() const noexcept { return activation_ != Activation::identity || loss_ != LossKind::mse; }

  friend bool operator==(const ProxyDescriptor&, const ProxyDescriptor&) = default;

 private:
  std::string name_;
  std::string version_;
  std::vector<LayerSpec> layers_;
  Activation activation_;
  LossKind loss_;
  Regularizer regularizer_;
  MappingStrategy strategy_;
  std::map<std::string, std::vector<ParamValue>> searchable_;
};

/// Whether `loss` may follow the `head` activation.
bool compatible(Activation head, LossKind loss) noexcept;

/// Soft bin memberships of a scalar: softmax over ((j+1)·x − Σ_{k≤j} β_k)/τ for
/// j = 0..cuts, with β sorted ascending.
std::vector<double> soft_bins(double x, std::span<const double> cut_points, double temperature);

/// Kronecker product of per-feature bin vectors; the first feature varies
/// slowest.
std::vector<double> kron_leaves(std::span<const std::vector<double>> bins);

/// Parameter blocks in layer order: dense layers own "<layer>.weight"
/// [out × in] and "<layer>.bias" [1 × out]; soft-binning layers own
/// "<layer>.cut_points" [features × cuts].
std::vector<ParamBlock> init_weights(const ProxyDescriptor& desc, Rng& rng,
                                     const Matrix* training_inputs = nullptr);

/// Throws DimensionError when blocks do not match the descriptor.
void check_weights(const ProxyDescriptor& desc, std::span<const ParamBlock> weights);

Matrix proxy_forward(const ProxyDescriptor& desc, std::span<const ParamBlock> weights, const Matrix& X);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<Matrix> gradients;
};

/// Data loss plus the regularizer on penalized blocks, with analytic
/// gradients for every block.
LossAndGradient proxy_loss_and_gradient(const ProxyDescriptor& desc,
                                        std::span<const ParamBlock> weights, const Matrix& X,
                                        const Matrix& Y);
double proxy_objective(const ProxyDescriptor& desc, std::span<const ParamBlock> weights,
                       const Matrix& X, const Matrix& Y);

/// Max over parameters of |analytic − central difference| / max(1, |analytic|).
double grad_check(const ProxyDescriptor& desc, std::span<const ParamBlock> weights,
                  const Matrix& X, const Matrix& Y, double eps = 1e-6);

}  // namespace doppel
