#include "doppel/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doppel/errors.hpp"

namespace doppel {

std::string_view to_string(MappingStrategy s) noexcept {
  switch (s) {
    case MappingStrategy::exact: return "exact";
    case MappingStrategy::approximate: return "approximate";
    case MappingStrategy::universal: return "universal";
  }
  return "?";
}

MappingStrategy parse_strategy(std::string_view name) {
  if (name == "exact") return MappingStrategy::exact;
  if (name == "approximate") return MappingStrategy::approximate;
  if (name == "universal") return MappingStrategy::universal;
  throw ConfigError("unknown mapping strategy '" + std::string(name) +
                    "' (expected exact, approximate or universal)");
}

std::string to_string(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  const double d = std::get<double>(v);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

double as_number(const ParamValue& v, std::string_view param) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigError("parameter '" + std::string(param) + "' expects a number, got '" +
                    std::get<std::string>(v) + "'");
}

const std::string& as_text(const ParamValue& v, std::string_view param) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("parameter '" + std::string(param) + "' expects a name, got a number");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation hidden) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.inputs = in;
  s.outputs = out;
  s.activation = hidden;
  return s;
}

LayerSpec LayerSpec::soft_binning(std::size_t features, std::size_t cuts, double temperature) {
  LayerSpec s;
  s.kind = LayerKind::soft_binning;
  s.inputs = features;
  s.cuts_per_feature = cuts;
  s.temperature = temperature;
  std::size_t leaves = 1;
  for (std::size_t i = 0; i < features; ++i) leaves *= cuts + 1;
  s.outputs = leaves;
  return s;
}

std::string_view to_string(Regularizer::Kind k) noexcept {
  switch (k) {
    case Regularizer::Kind::none: return "none";
    case Regularizer::Kind::l1: return "l1";
    case Regularizer::Kind::l2: return "l2";
    case Regularizer::Kind::elastic: return "elastic";
  }
  return "?";
}

Regularizer::Kind parse_regularizer(std::string_view name) {
  if (name == "none") return Regularizer::Kind::none;
  if (name == "l1") return Regularizer::Kind::l1;
  if (name == "l2") return Regularizer::Kind::l2;
  if (name == "elastic") return Regularizer::Kind::elastic;
  throw ConfigError("unknown regularizer '" + std::string(name) + "'");
}

namespace {

double effective_rho(const Regularizer& r) {
  switch (r.kind) {
    case Regularizer::Kind::l1: return 1.0;
    case Regularizer::Kind::l2: return 0.0;
    default: return r.rho;
  }
}

}  // namespace

double Regularizer::penalty(std::span<const double> w) const {
  if (kind == Kind::none || alpha == 0.0) return 0.0;
  const double rho_eff = effective_rho(*this);
  double l1 = 0.0;
  double l2 = 0.0;
  for (double v : w) {
    l1 += std::abs(v);
    l2 += v * v;
  }
  return alpha * (rho_eff * l1 + 0.5 * (1.0 - rho_eff) * l2);
}

void Regularizer::add_gradient(std::span<const double> w, std::span<double> grad) const {
  if (kind == Kind::none || alpha == 0.0) return;
  const double rho_eff = effective_rho(*this);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double sign = w[i] > 0.0 ? 1.0 : (w[i] < 0.0 ? -1.0 : 0.0);
    grad[i] += alpha * (rho_eff * sign + (1.0 - rho_eff) * w[i]);
  }
}

bool compatible(Activation head, LossKind loss) noexcept {
  switch (head) {
    case Activation::identity:
      return loss == LossKind::mse || loss == LossKind::categorical_hinge;
    case Activation::softmax:
      return loss == LossKind::categorical_ce || loss == LossKind::categorical_hinge;
    case Activation::sigmoid:
      return loss == LossKind::binary_ce;
    case Activation::relu:
      return false;
  }
  return false;
}

ProxyDescriptor::ProxyDescriptor(std::string name, std::vector<LayerSpec> layers,
                                 Activation activation, LossKind loss, Regularizer regularizer,
                                 MappingStrategy strategy, std::string version,
                                 std::map<std::string, std::vector<ParamValue>> searchable)
    : name_(std::move(name)),
      version_(std::move(version)),
      layers_(std::move(layers)),
      activation_(activation),
      loss_(loss),
      regularizer_(regularizer),
      strategy_(strategy),
      searchable_(std::move(searchable)) {
  if (layers_.empty()) throw ConfigError("proxy '" + name_ + "' has no layers");
  if (!compatible(activation_, loss_)) {
    throw ConfigError("proxy '" + name_ + "': loss " + std::string(to_string(loss_)) +
                      " is incompatible with " + std::string(to_string(activation_)) + " output");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.inputs == 0 || l.outputs == 0) {
      throw DimensionError("proxy '" + name_ + "': layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && layers_[i - 1].outputs != l.inputs) {
      throw DimensionError("proxy '" + name_ + "': layer " + std::to_string(i) + " expects " +
                           std::to_string(l.inputs) + " inputs but the previous layer emits " +
                           std::to_string(layers_[i - 1].outputs));
    }
    if (l.kind == LayerKind::soft_binning) {
      if (i != 0) throw ConfigError("proxy '" + name_ + "': soft binning must be the first layer");
      if (l.cuts_per_feature == 0) throw ConfigError("soft binning needs at least one cut point");
      if (!(l.temperature > 0.0) || !std::isfinite(l.temperature))
        throw ConfigError("soft binning temperature must be positive");
      if (i + 1 == layers_.size()) throw ConfigError("soft binning cannot be the output layer");
      const LayerSpec expected = LayerSpec::soft_binning(l.inputs, l.cuts_per_feature, l.temperature);
      if (expected.outputs != l.outputs) throw DimensionError("soft binning leaf count mismatch");
    } else if (i + 1 < layers_.size() && l.activation != Activation::identity &&
               l.activation != Activation::relu) {
      throw ConfigError("hidden layers support identity or relu activations only");
    }
  }
  if (regularizer_.alpha < 0.0 || regularizer_.rho < 0.0 || regularizer_.rho > 1.0) {
    throw ConfigError("regularizer needs alpha >= 0 and rho in [0, 1]");
  }
}

std::vector<double> soft_bins(double x, std::span<const double> cut_points, double temperature) {
  std::vector<double> sorted(cut_points.begin(), cut_points.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> logits(sorted.size() + 1);
  double offset = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j > 0) offset -= sorted[j - 1];
    logits[j] = (static_cast<double>(j + 1) * x + offset) / temperature;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return logits;
}

std::vector<double> kron_leaves(std::span<const std::vector<double>> bins) {
  std::vector<double> leaves{1.0};
  for (const auto& b : bins) {
    std::vector<double> next;
    next.reserve(leaves.size() * b.size());
    for (double l : leaves)
      for (double v : b) next.push_back(l * v);
    leaves = std::move(next);
  }
  return leaves;
}

std::vector<ParamBlock> init_weights(const ProxyDescriptor& desc, Rng& rng,
                                     const Matrix* training_inputs) {
  std::vector<ParamBlock> blocks;
  for (std::size_t i = 0; i < desc.layers().size(); ++i) {
    const auto& l = desc.layers()[i];
    const std::string prefix = "layer" + std::to_string(i);
    if (l.kind == LayerKind::dense) {
      blocks.push_back({prefix + ".weight", glorot_init(l.inputs, l.outputs, rng), true});
      blocks.push_back({prefix + ".bias", Matrix(1, l.outputs), false});
      continue;
    }
    // Cut points start at evenly spaced quantiles (the median for one cut).
    Matrix cuts(l.inputs, l.cuts_per_feature);
    for (std::size_t f = 0; f < l.inputs; ++f) {
      if (training_inputs == nullptr || training_inputs->rows() == 0) {
        for (std::size_t c = 0; c < l.cuts_per_feature; ++c)
          cuts(f, c) = static_cast<double>(c) - 0.5 * static_cast<double>(l.cuts_per_feature - 1);
        continue;
      }
      auto col = training_inputs->column_copy(f);
      std::sort(col.begin(), col.end());
      for (std::size_t c = 0; c < l.cuts_per_feature; ++c) {
        const double q = static_cast<double>(c + 1) / static_cast<double>(l.cuts_per_feature + 1);
        const double pos = q * static_cast<double>(col.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, col.size() - 1);
        cuts(f, c) = col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
      }
    }
    blocks.push_back({prefix + ".cut_points", std::move(cuts), false});
  }
  return blocks;
}

void check_weights(const ProxyDescriptor& desc, std::span<const ParamBlock> weights) {
  std::size_t at = 0;
  auto expect = [&](std::size_t rows, std::size_t cols) {
    if (at >= weights.size()) throw DimensionError("proxy '" + desc.name() + "' is missing parameter blocks");
    const auto& w = weights[at++].value;
    if (w.rows() != rows || w.cols() != cols) {
      throw DimensionError("parameter block '" + weights[at - 1].name + "' has shape " +
                           std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + ", expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  };
  for (const auto& l : desc.layers()) {
    if (l.kind == LayerKind::dense) {
      expect(l.outputs, l.inputs);
      expect(1, l.outputs);
    } else {
      expect(l.inputs, l.cuts_per_feature);
    }
  }
  if (at != weights.size()) throw DimensionError("proxy '" + desc.name() + "' has extra parameter blocks");
}

namespace {

struct BinningCache {
  // Per feature: n x (cuts + 1) bin memberships and the ascending sort order.
  std::vector<Matrix> bins;
  std::vector<std::vector<std::size_t>> order;
};

Matrix binning_forward(const LayerSpec& l, const Matrix& cuts, const Matrix& X, BinningCache* cache) {
  const std::size_t n = X.rows();
  const std::size_t c = l.cuts_per_feature;
  std::vector<Matrix> bins;
  for (std::size_t f = 0; f < l.inputs; ++f) {
    Matrix b(n, c + 1);
    const auto row = cuts.row_span(f);
    for (std::size_t r = 0; r < n; ++r) {
      const auto v = soft_bins(X(r, f), row, l.temperature);
      std::copy(v.begin(), v.end(), b.row_span(r).begin());
    }
    if (cache != nullptr) {
      std::vector<std::size_t> ord(c);
      std::iota(ord.begin(), ord.end(), std::size_t{0});
      std::stable_sort(ord.begin(), ord.end(), [&](auto a, auto b2) { return row[a] < row[b2]; });
      cache->order.push_back(std::move(ord));
    }
    bins.push_back(std::move(b));
  }
  Matrix leaves(n, l.outputs);
  std::vector<std::vector<double>> per_feature(l.inputs);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < l.inputs; ++f) {
      const auto s = bins[f].row_span(r);
      per_feature[f].assign(s.begin(), s.end());
    }
    const auto leaf = kron_leaves(per_feature);
    std::copy(leaf.begin(), leaf.end(), leaves.row_span(r).begin());
  }
  if (cache != nullptr) cache->bins = std::move(bins);
  return leaves;
}

Matrix binning_backward(const LayerSpec& l, const BinningCache& cache, const Matrix& grad_leaves) {
  const std::size_t n = grad_leaves.rows();
  const std::size_t c = l.cuts_per_feature;
  const std::size_t width = c + 1;
  const std::size_t d = l.inputs;
  Matrix grad_cuts(d, c);
  std::vector<std::size_t> digits(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < d; ++f) {
      // dL/dh_f[j] = Σ over leaves with digit j at f of g_leaf · Π_{k≠f} h_k.
      std::vector<double> g_bins(width, 0.0);
      for (std::size_t leaf = 0; leaf < l.outputs; ++leaf) {
        std::size_t rest = leaf;
        for (std::size_t k = d; k-- > 0;) {
          digits[k] = rest % width;
          rest /= width;
        }
        double prod = grad_leaves(r, leaf);
        for (std::size_t k = 0; k < d; ++k)
          if (k != f) prod *= cache.bins[k](r, digits[k]);
        g_bins[digits[f]] += prod;
      }
      const auto h = cache.bins[f].row_span(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j) dot += g_bins[j] * h[j];
      // Softmax backward, then logit_j depends on -sorted[m] / τ for all j > m.
      double tail = 0.0;
      for (std::size_t j = width; j-- > 1;) {
        tail += h[j] * (g_bins[j] - dot);
        const std::size_t m = j - 1;
        grad_cuts(f, cache.order[f][m]) -= tail / l.temperature;
      }
    }
  }
  return grad_cuts;
}

struct ForwardTrace {
  std::vector<Matrix> outputs;  // post-activation output of each layer
  std::vector<BinningCache> binning;
};

Activation layer_activation(const ProxyDescriptor& desc, std::size_t i) {
  return i + 1 == desc.layers().size() ? desc.activation() : desc.layers()[i].activation;
}

Matrix run_forward(const ProxyDescriptor& desc, std::span<const ParamBlock> weights, const Matrix& X,
                   ForwardTrace* trace) {
  check_weights(desc, weights);
  if (X.cols() != desc.input_width()) {
    throw DimensionError("proxy '" + desc.name() + "' expects " + std::to_string(desc.input_width()) +
                         " input columns, got " + std::to_string(X.cols()));
  }
  Matrix current = X;
  std::size_t block = 0;
  for (std::size_t i = 0; i < desc.layers().size(); ++i) {
    const auto& l = desc.layers()[i];
    if (l.kind == LayerKind::dense) {
      const auto& W = weights[block].value;
      const auto& b = weights[block + 1].value;
      block += 2;
      current = dense_forward(W, b.values(), current, layer_activation(desc, i));
    } else {
      BinningCache cache;
      current = binning_forward(l, weights[block].value, current, trace ? &cache : nullptr);
      block += 1;
      if (trace) trace->binning.push_back(std::move(cache));
    }
    if (trace) trace->outputs.push_back(current);
  }
  return current;
}

double regularization(const ProxyDescriptor& desc, std::span<const ParamBlock> weights) {
  double total = 0.0;
  for (const auto& w : weights)
    if (w.penalized) total += desc.regularizer().penalty(w.value.values());
  return total;
}

}  // namespace

Matrix proxy_forward(const ProxyDescriptor& desc, std::span<const ParamBlock> weights, const Matrix& X) {
  return run_forward(desc, weights, X, nullptr);
}

double proxy_objective(const ProxyDescriptor& desc, std::span<const ParamBlock> weights,
                       const Matrix& X, const Matrix& Y) {
  return loss_eval(desc.loss(), Y, proxy_forward(desc, weights, X)) + regularization(desc, weights);
}

LossAndGradient proxy_loss_and_gradient(const ProxyDescriptor& desc,
                                        std::span<const ParamBlock> weights, const Matrix& X,
                                        const Matrix& Y) {
  ForwardTrace trace;
  const Matrix out = run_forward(desc, weights, X, &trace);
  LossAndGradient result;
  result.loss = loss_eval(desc.loss(), Y, out) + regularization(desc, weights);
  result.gradients.resize(weights.size());

  Matrix grad = loss_gradient(desc.loss(), Y, out);
  std::size_t block = weights.size();
  std::size_t binning_at = trace.binning.size();
  for (std::size_t i = desc.layers().size(); i-- > 0;) {
    const auto& l = desc.layers()[i];
    const Matrix& input = i == 0 ? X : trace.outputs[i - 1];
    if (l.kind == LayerKind::dense) {
      block -= 2;
      const Matrix gz = activation_backward(layer_activation(desc, i), trace.outputs[i], grad);
      const auto& W = weights[block].value;
      Matrix gW(W.rows(), W.cols());
      Matrix gb(1, W.rows());
      for (std::size_t r = 0; r < gz.rows(); ++r) {
        const auto x = input.row_span(r);
        for (std::size_t o = 0; o < W.rows(); ++o) {
          const double g = gz(r, o);
          gb(0, o) += g;
          if (g == 0.0) continue;
          for (std::size_t j = 0; j < x.size(); ++j) gW(o, j) += g * x[j];
        }
      }
      if (weights[block].penalized) desc.regularizer().add_gradient(W.values(), gW.values());
      result.gradients[block] = std::move(gW);
      result.gradients[block + 1] = std::move(gb);
      if (i > 0) grad = matmul(gz, W);
    } else {
      block -= 1;
      --binning_at;
      result.gradients[block] = binning_backward(l, trace.binning[binning_at], grad);
    }
  }
  return result;
}

double grad_check(const ProxyDescriptor& desc, std::span<const ParamBlock> weights, const Matrix& X,
                  const Matrix& Y, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ConfigError("grad_check eps must lie in [1e-7, 1e-3]");
  const auto analytic = proxy_loss_and_gradient(desc, weights, X, Y);
  std::vector<ParamBlock> probe(weights.begin(), weights.end());
  double worst = 0.0;
  for (std::size_t b = 0; b < probe.size(); ++b) {
    auto values = probe[b].value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = proxy_objective(desc, probe, X, Y);
      values[i] = saved - eps;
      const double down = proxy_objective(desc, probe, X, Y);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.gradients[b].values()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace doppel
