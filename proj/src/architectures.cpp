#include "doppel/architectures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doppel/errors.hpp"

namespace doppel {

std::string_view to_string(AdapterKind k) noexcept {
  return k == AdapterKind::classifier ? "classifier" : "regressor";
}

ArchitectureTemplate builtin_template(const RegistryKey& key) {
  ArchitectureTemplate t;
  const Family family = [&] {
    try {
      return parse_family(key.model_name);
    } catch (const LookupError&) {
      throw LookupError("no architecture registered for " + key.str());
    }
  }();
  if (registry_key_of(family) != key) throw LookupError("no architecture registered for " + key.str());

  const std::vector<ParamValue> optimizers{std::string("adam"), std::string("nadam")};
  t.searchable["optimizer"] = optimizers;
  switch (family) {
    case Family::linear:
    case Family::ridge:
    case Family::lasso:
    case Family::elasticnet:
      t.name = "glm_regressor";
      t.regularizer = family == Family::ridge   ? Regularizer::Kind::l2
                      : family == Family::lasso ? Regularizer::Kind::l1
                      : family == Family::elasticnet ? Regularizer::Kind::elastic
                                                     : Regularizer::Kind::none;
      break;
    case Family::logistic:
      t.name = "glm_classifier";
      t.activation = Activation::softmax;
      t.loss = LossKind::categorical_ce;
      break;
    case Family::linear_svc:
      t.name = "linear_svc";
      t.loss = LossKind::categorical_hinge;
      t.strategy = MappingStrategy::approximate;
      break;
    case Family::decision_tree:
      t.name = "dndt";
      t.shape = ArchitectureTemplate::Shape::dndt;
      t.activation = Activation::softmax;
      t.loss = LossKind::categorical_ce;
      t.strategy = MappingStrategy::approximate;
      t.searchable["temperature"] = {0.1};
      t.searchable["cut_points"] = {1.0};
      break;
  }
  return t;
}

namespace {

std::size_t positive_count(const ParamValue& v, std::string_view name) {
  const double d = as_number(v, name);
  if (!(d >= 1.0) || d != std::floor(d) || d > 1e6) {
    throw ConfigError("parameter '" + std::string(name) + "' must be a positive integer");
  }
  return static_cast<std::size_t>(d);
}

std::size_t head_width(DataShape shape) { return shape.classes == 0 ? 1 : shape.classes; }

}  // namespace

ProxyDescriptor instantiate(const ArchitectureTemplate& templ, DataShape shape, const ParamMap& overrides) {
  if (shape.features == 0) throw DimensionError("cannot build a proxy for zero features");
  const bool classifier = templ.activation == Activation::softmax || templ.loss == LossKind::categorical_hinge;
  if (classifier && shape.classes < 2) {
    throw InputError("proxy '" + templ.name + "' needs at least 2 classes");
  }
  auto find = [&](const char* name) -> const ParamValue* {
    const auto it = overrides.find(name);
    return it == overrides.end() ? nullptr : &it->second;
  };

  Regularizer reg;
  reg.kind = templ.regularizer;
  if (reg.kind != Regularizer::Kind::none) {
    reg.alpha = 1.0;
    if (const auto* a = find("alpha")) reg.alpha = as_number(*a, "alpha");
    if (const auto* r = find("l1_ratio")) reg.rho = as_number(*r, "l1_ratio");
  }

  std::vector<LayerSpec> layers;
  switch (templ.shape) {
    case ArchitectureTemplate::Shape::glm:
      layers.push_back(LayerSpec::dense(shape.features, head_width(shape)));
      break;
    case ArchitectureTemplate::Shape::dndt: {
      std::size_t cuts = 1;
      double temperature = 0.1;
      if (const auto* c = find("cut_points")) cuts = positive_count(*c, "cut_points");
      if (const auto* t = find("temperature")) temperature = as_number(*t, "temperature");
      double leaves = std::pow(static_cast<double>(cuts + 1), static_cast<double>(shape.features));
      if (leaves > 65536.0) {
        throw ConfigError("soft binning over " + std::to_string(shape.features) + " features with " +
                          std::to_string(cuts) + " cuts needs too many leaves");
      }
      layers.push_back(LayerSpec::soft_binning(shape.features, cuts, temperature));
      layers.push_back(LayerSpec::dense(layers.back().outputs, head_width(shape)));
      break;
    }
    case ArchitectureTemplate::Shape::mlp: {
      std::size_t width = 8;
      std::size_t depth = 1;
      if (const auto* h = find("hidden_units")) width = positive_count(*h, "hidden_units");
      if (const auto* h = find("hidden_layers")) {
        const double d = as_number(*h, "hidden_layers");
        if (d < 0.0 || d != std::floor(d) || d > 64) throw ConfigError("hidden_layers must be a small non-negative integer");
        depth = static_cast<std::size_t>(d);
      }
      std::size_t in = shape.features;
      for (std::size_t i = 0; i < depth; ++i) {
        layers.push_back(LayerSpec::dense(in, width, Activation::relu));
        in = width;
      }
      layers.push_back(LayerSpec::dense(in, head_width(shape)));
      break;
    }
  }
  return ProxyDescriptor(templ.name, std::move(layers), templ.activation, templ.loss, reg,
                         templ.strategy, "default", templ.searchable);
}

ProxyDescriptor resolve_architecture(const RegistryKey& key, DataShape shape, const ParamMap& overrides) {
  return instantiate(builtin_template(key), shape, overrides);
}

namespace {

bool is_dndt(const ProxyDescriptor& desc) {
  return desc.layers().front().kind == LayerKind::soft_binning;
}

bool is_mlp(const ProxyDescriptor& desc) {
  return desc.layers().size() > 1 && desc.layers().front().kind == LayerKind::dense;
}

}  // namespace

std::vector<std::string> architecture_param_names(const ProxyDescriptor& desc) {
  if (is_dndt(desc)) return {"cut_points", "temperature"};
  if (is_mlp(desc)) return {"hidden_layers", "hidden_units"};
  if (desc.regularizer().kind != Regularizer::Kind::none) return {"alpha", "l1_ratio"};
  return {};
}

ProxyDescriptor with_params(const ProxyDescriptor& desc, const ParamMap& params) {
  if (params.empty()) return desc;
  const auto allowed = architecture_param_names(desc);
  for (const auto& [name, value] : params) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw ConfigError("proxy '" + desc.name() + "' has no architecture parameter '" + name + "'");
    }
  }
  auto layers = desc.layers();
  Regularizer reg = desc.regularizer();
  if (is_dndt(desc)) {
    auto first = layers.front();
    std::size_t cuts = first.cuts_per_feature;
    double temperature = first.temperature;
    if (auto it = params.find("cut_points"); it != params.end()) cuts = positive_count(it->second, "cut_points");
    if (auto it = params.find("temperature"); it != params.end()) temperature = as_number(it->second, "temperature");
    layers[0] = LayerSpec::soft_binning(first.inputs, cuts, temperature);
    layers[1] = LayerSpec::dense(layers[0].outputs, layers[1].outputs);
  } else if (is_mlp(desc)) {
    std::size_t width = layers.front().outputs;
    std::size_t depth = layers.size() - 1;
    if (auto it = params.find("hidden_units"); it != params.end()) width = positive_count(it->second, "hidden_units");
    if (auto it = params.find("hidden_layers"); it != params.end()) {
      const double d = as_number(it->second, "hidden_layers");
      if (d < 0.0 || d != std::floor(d) || d > 64) throw ConfigError("hidden_layers must be a small non-negative integer");
      depth = static_cast<std::size_t>(d);
    }
    const std::size_t in = layers.front().inputs;
    const std::size_t out = layers.back().outputs;
    layers.clear();
    std::size_t prev = in;
    for (std::size_t i = 0; i < depth; ++i) {
      layers.push_back(LayerSpec::dense(prev, width, Activation::relu));
      prev = width;
    }
    layers.push_back(LayerSpec::dense(prev, out));
  } else {
    if (auto it = params.find("alpha"); it != params.end()) reg.alpha = as_number(it->second, "alpha");
    if (auto it = params.find("l1_ratio"); it != params.end()) reg.rho = as_number(it->second, "l1_ratio");
  }
  return ProxyDescriptor(desc.name(), std::move(layers), desc.activation(), desc.loss(), reg, desc.strategy(),
                         desc.version(), desc.searchable_params());
}

ParamMap proxy_overrides_from(const PrimalModel& primal) {
  ParamMap out;
  for (const auto& [name, value] : primal.hyperparams())
    if (name == "alpha" || name == "l1_ratio") out[name] = value;
  return out;
}

std::vector<ParamBlock> transfer_exact(const PrimalModel& primal, const ProxyDescriptor& proxy) {
  if (!is_glm(primal.family())) {
    throw UnsupportedMapError("no exact map exists for " + std::string(to_string(primal.family())) +
                              "; use the approximate strategy");
  }
  if (proxy.strategy() != MappingStrategy::exact) {
    throw UnsupportedMapError("proxy '" + proxy.name() + "' is not an exact-map architecture");
  }
  if (!primal.fitted()) throw StateError("exact transfer needs a fitted primal model");
  if (proxy.layers().size() != 1 || proxy.layers()[0].kind != LayerKind::dense) {
    throw UnsupportedMapError("exact transfer targets a single dense layer");
  }
  const auto& coef = primal.coefficients();
  const auto& bias = primal.intercepts();
  const std::size_t d = primal.num_features();
  if (proxy.input_width() != d) {
    throw DimensionError("proxy expects " + std::to_string(proxy.input_width()) +
                         " inputs, primal was fitted on " + std::to_string(d));
  }

  Matrix W;
  Matrix b;
  if (primal.family() == Family::logistic && coef.rows() == 1) {
    W = Matrix(2, d);
    b = Matrix(1, 2);
    for (std::size_t j = 0; j < d; ++j) {
      W(0, j) = -0.5 * coef(0, j);
      W(1, j) = 0.5 * coef(0, j);
    }
    b(0, 0) = -0.5 * bias[0];
    b(0, 1) = 0.5 * bias[0];
  } else {
    W = coef;
    b = Matrix::row(bias);
  }
  if (W.rows() != proxy.output_width()) {
    throw DimensionError("proxy has " + std::to_string(proxy.output_width()) + " outputs, primal has " +
                         std::to_string(W.rows()));
  }
  std::vector<ParamBlock> blocks{{"layer0.weight", std::move(W), true}, {"layer0.bias", std::move(b), false}};
  check_weights(proxy, blocks);
  return blocks;
}

DndtSpec dndt_spec_from(const ProxyDescriptor& desc, std::span<const ParamBlock> weights) {
  check_weights(desc, weights);
  if (desc.layers().size() != 2 || desc.layers()[0].kind != LayerKind::soft_binning) {
    throw UnsupportedMapError("proxy '" + desc.name() + "' is not a differentiable tree");
  }
  DndtSpec spec;
  spec.cut_points_per_feature = desc.layers()[0].cuts_per_feature;
  spec.temperature = desc.layers()[0].temperature;
  spec.cut_points = weights[0].value;
  spec.leaf_weights = weights[1].value.transposed();
  const auto bias = weights[2].value.values();
  spec.leaf_bias.assign(bias.begin(), bias.end());
  return spec;
}

Matrix dndt_forward(const DndtSpec& spec, const Matrix& x) {
  if (!(spec.temperature > 0.0)) throw ConfigError("DNDT temperature must be positive");
  const std::size_t d = spec.cut_points.rows();
  if (x.cols() != d) throw DimensionError("DNDT expects " + std::to_string(d) + " features");
  const std::size_t classes = spec.leaf_weights.cols();
  Matrix scores(x.rows(), classes);
  std::vector<std::vector<double>> bins(d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t f = 0; f < d; ++f) bins[f] = soft_bins(x(r, f), spec.cut_points.row_span(f), spec.temperature);
    const auto leaves = kron_leaves(bins);
    if (leaves.size() != spec.leaf_weights.rows()) throw DimensionError("DNDT leaf count mismatch");
    for (std::size_t k = 0; k < classes; ++k) {
      double acc = spec.leaf_bias.empty() ? 0.0 : spec.leaf_bias[k];
      for (std::size_t l = 0; l < leaves.size(); ++l) acc += leaves[l] * spec.leaf_weights(l, k);
      scores(r, k) = acc;
    }
  }
  return apply_activation(scores, Activation::softmax);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

namespace {

bool is_regression_head(const ProxyDescriptor& desc) {
  return desc.activation() == Activation::identity && desc.loss() == LossKind::mse;
}

}  // namespace

TrainedProxy train_proxy(const ProxyDescriptor& desc, const Matrix& X, const Matrix& targets,
                         const TrainConfig& config) {
  config.validate();
  if (X.rows() == 0) throw InputError("cannot train on zero rows");
  if (X.rows() != targets.rows() || targets.cols() != desc.output_width()) {
    throw DimensionError("training targets are " + std::to_string(targets.rows()) + "x" +
                         std::to_string(targets.cols()) + ", proxy emits " + std::to_string(desc.output_width()) +
                         " columns for " + std::to_string(X.rows()) + " rows");
  }
  Rng rng(config.seed);
  TrainedProxy out{desc, init_weights(desc, rng, &X), {}, false};

  // Standardize regression targets; undone on the output layer afterwards.
  const bool rescale = is_regression_head(desc);
  std::vector<double> mean(targets.cols(), 0.0);
  std::vector<double> scale(targets.cols(), 1.0);
  Matrix Y = targets;
  if (rescale) {
    const double n = static_cast<double>(Y.rows());
    for (std::size_t c = 0; c < Y.cols(); ++c) {
      double m = 0.0;
      for (std::size_t r = 0; r < Y.rows(); ++r) m += Y(r, c);
      m /= n;
      double v = 0.0;
      for (std::size_t r = 0; r < Y.rows(); ++r) v += (Y(r, c) - m) * (Y(r, c) - m);
      v /= n;
      mean[c] = m;
      scale[c] = v > 0.0 ? std::sqrt(v) : 1.0;
      for (std::size_t r = 0; r < Y.rows(); ++r) Y(r, c) = (Y(r, c) - m) / scale[c];
    }
  }

  OptimizerState opt = make_optimizer(config.optimizer, config.learning_rate, out.weights);
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs && !out.diverged; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const Matrix xb = X.select_rows(batch);
      const Matrix yb = Y.select_rows(batch);
      const auto lg = proxy_loss_and_gradient(desc, out.weights, xb, yb);
      if (!std::isfinite(lg.loss)) {
        out.diverged = true;
        break;
      }
      try {
        optimizer_step(opt, out.weights, lg.gradients);
      } catch (const NumericError&) {
        out.diverged = true;
        break;
      }
      epoch_loss += lg.loss * static_cast<double>(batch.size());
    }
    if (!out.diverged) out.history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  for (const auto& w : out.weights)
    if (!w.value.all_finite()) out.diverged = true;

  if (rescale && !out.diverged) {
    auto& W = out.weights[out.weights.size() - 2].value;
    auto& b = out.weights.back().value;
    for (std::size_t o = 0; o < W.rows(); ++o) {
      for (std::size_t j = 0; j < W.cols(); ++j) W(o, j) *= scale[o];
      b(0, o) = b(0, o) * scale[o] + mean[o];
    }
  }
  return out;
}

Matrix encode_targets(const std::vector<double>& y, Task task, std::size_t classes) {
  if (task == Task::regression) return Matrix::column(y);
  Matrix out(y.size(), classes);
  for (std::size_t r = 0; r < y.size(); ++r) {
    const auto k = static_cast<std::size_t>(y[r]);
    if (y[r] < 0.0 || k >= classes) throw InputError("label " + std::to_string(y[r]) + " is outside 0.." + std::to_string(classes - 1));
    out(r, k) = 1.0;
  }
  return out;
}

Matrix distillation_targets(const PrimalModel& primal, const Matrix& X) {
  if (!primal.fitted()) throw StateError("distillation needs a fitted primal model");
  if (primal.has_probabilities()) return primal.predict_proba(X);
  const auto pred = primal.predict(X);
  return encode_targets(pred, primal.task(), primal.num_classes());
}

TrainedProxy distill(const PrimalModel& primal, const ProxyDescriptor& proxy, const Matrix& X,
                     const TrainConfig& config) {
  if (proxy.strategy() != MappingStrategy::approximate) {
    throw UnsupportedMapError("distillation needs an approximate-map proxy, got '" +
                              std::string(to_string(proxy.strategy())) + "'");
  }
  return train_proxy(proxy, X, distillation_targets(primal, X), config);
}

ProxyDescriptor universal_proxy(DataShape shape, const std::vector<std::size_t>& hidden_layers) {
  if (shape.features == 0) throw DimensionError("cannot build a proxy for zero features");
  const bool classifier = shape.classes > 0;
  if (classifier && shape.classes < 2) throw InputError("universal classifier needs at least 2 classes");
  std::vector<LayerSpec> layers;
  std::size_t in = shape.features;
  for (auto width : hidden_layers) {
    if (width == 0) throw ConfigError("hidden layer sizes must be >= 1");
    layers.push_back(LayerSpec::dense(in, width, Activation::relu));
    in = width;
  }
  layers.push_back(LayerSpec::dense(in, classifier ? shape.classes : 1));
  std::map<std::string, std::vector<ParamValue>> searchable{
      {"optimizer", {std::string("adam"), std::string("nadam")}}};
  if (!hidden_layers.empty()) searchable["hidden_units"] = {static_cast<double>(hidden_layers.front())};
  return ProxyDescriptor("mlp", std::move(layers), classifier ? Activation::softmax : Activation::identity,
                         classifier ? LossKind::categorical_ce : LossKind::mse, Regularizer{},
                         MappingStrategy::universal, "default", std::move(searchable));
}

std::vector<double> decode_outputs(const Matrix& outputs, bool classifier) {
  if (classifier) return argmax_rows(outputs);
  return outputs.column_copy(0);
}

}  // namespace doppel
