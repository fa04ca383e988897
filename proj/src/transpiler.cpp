#include "doppel/transpiler.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "doppel/errors.hpp"
#include "doppel/native_format.hpp"
#include "doppel/onnx.hpp"

namespace doppel {

Registry::Registry(const Registry& other) {
  std::shared_lock lock(other.mutex_);
  entries_ = other.entries_;
}

Registry& Registry::operator=(const Registry& other) {
  if (this == &other) return *this;
  std::map<std::pair<RegistryKey, std::string>, RegistryEntry> copy;
  {
    std::shared_lock lock(other.mutex_);
    copy = other.entries_;
  }
  std::unique_lock lock(mutex_);
  entries_ = std::move(copy);
  return *this;
}

void Registry::register_entry(RegistryEntry entry) {
  if (entry.key.module_name.empty() || entry.key.model_name.empty()) {
    throw InputError("registry key needs a module and a model name");
  }
  if (entry.version.empty()) throw InputError("registry version must not be empty");
  if (entry.proxy.name.empty()) throw InputError("registry entry for " + entry.key.str() + " has no architecture");
  std::unique_lock lock(mutex_);
  auto id = std::make_pair(entry.key, entry.version);
  if (entries_.contains(id)) {
    throw ConflictError(entry.key.str() + " version '" + entry.version + "' is already registered");
  }
  entries_.emplace(std::move(id), std::move(entry));
}

RegistryEntry Registry::lookup(const RegistryKey& key, const std::optional<std::string>& version) const {
  const std::string v = version.value_or("default");
  std::shared_lock lock(mutex_);
  if (auto it = entries_.find({key, v}); it != entries_.end()) return it->second;
  std::set<std::string> known;
  for (const auto& [id, e] : entries_) known.insert(id.first.str() + "@" + id.second);
  std::string listing;
  for (const auto& k : known) listing += (listing.empty() ? "" : ", ") + k;
  throw LookupError("no registry entry for " + key.str() + " version '" + v + "'; known: " +
                    (listing.empty() ? "(none)" : listing));
}

bool Registry::contains(const RegistryKey& key, const std::string& version) const {
  std::shared_lock lock(mutex_);
  return entries_.contains({key, version});
}

std::vector<RegistryEntry> Registry::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<RegistryEntry> out;
  for (const auto& [id, e] : entries_) out.push_back(e);
  return out;
}

std::size_t Registry::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

Registry Registry::with_builtins() {
  Registry r;
  for (Family f : {Family::linear, Family::ridge, Family::lasso, Family::elasticnet, Family::logistic,
                   Family::linear_svc, Family::decision_tree}) {
    const auto key = registry_key_of(f);
    r.register_entry(RegistryEntry{key, builtin_template(key),
                                   task_of(f) == Task::classification ? AdapterKind::classifier
                                                                      : AdapterKind::regressor,
                                   "default"});
  }
  return r;
}

Registry& default_registry() {
  static Registry registry = Registry::with_builtins();
  return registry;
}

ProxyDescriptor with_strategy(const ProxyDescriptor& desc, MappingStrategy strategy) {
  if (desc.strategy() == strategy) return desc;
  return ProxyDescriptor(desc.name(), desc.layers(), desc.activation(), desc.loss(), desc.regularizer(), strategy,
                         desc.version(), desc.searchable_params());
}

DopedModel::DopedModel(PrimalModel primal, RegistryEntry entry, MappingStrategy strategy, DopeOptions options)
    : primal_(std::move(primal)),
      entry_(std::move(entry)),
      strategy_(strategy),
      adapter_(entry_.adapter_kind),
      train_(options.train),
      universal_hidden_(std::move(options.universal_hidden)),
      default_params_(std::move(options.params)) {
  train_.validate();
}

void DopedModel::require_fitted(const char* what) const {
  if (!proxy_) throw StateError(std::string(what) + " called before the doped model was fitted");
}

const TrainedProxy& DopedModel::proxy() const {
  require_fitted("proxy");
  return *proxy_;
}

namespace {

std::size_t label_classes(const std::vector<double>& y) {
  std::set<double> distinct;
  double max_label = 0.0;
  for (double v : y) {
    if (!(v >= 0.0) || v != std::floor(v)) {
      throw InputError("classification labels must be non-negative integers, got " + std::to_string(v));
    }
    distinct.insert(v);
    max_label = std::max(max_label, v);
  }
  if (distinct.size() < 2) throw InputError("degenerate target: classification needs at least two classes");
  return static_cast<std::size_t>(max_label) + 1;
}

}  // namespace

DopedModel& DopedModel::fit(const Matrix& X, const std::vector<double>& y, const std::optional<SearchSpace>& params) {
  if (X.rows() == 0) throw InputError("cannot fit on an empty matrix");
  if (X.rows() != y.size()) {
    throw DimensionError("X has " + std::to_string(X.rows()) + " rows but y has " + std::to_string(y.size()));
  }
  const Task task = primal_.task();
  DataShape shape{X.rows(), X.cols(), 0};
  if (task == Task::classification) {
    shape.classes = label_classes(y);
  } else {
    for (double v : y) {
      if (!std::isfinite(v)) throw InputError("regression target holds a non-finite value");
    }
  }
  const auto& space = params ? params : default_params_;

  if (strategy_ == MappingStrategy::exact) {
    if (space && !space->empty()) {
      throw ConfigError("the exact map copies weights and takes no search parameters");
    }
    primal_.fit(X, y);
    auto desc = instantiate(entry_.proxy, DataShape{X.rows(), X.cols(), task == Task::classification ? primal_.num_classes() : 0},
                            proxy_overrides_from(primal_));
    auto weights = transfer_exact(primal_, with_strategy(desc, MappingStrategy::exact));
    proxy_ = TrainedProxy{with_strategy(desc, MappingStrategy::exact), std::move(weights), {}, false};
    history_.clear();
    configs_evaluated_ = 0;
    search_.reset();
    teacher_ = Matrix();
    return *this;
  }

  ProxyDescriptor desc = [&] {
    if (strategy_ == MappingStrategy::approximate) {
      primal_.fit(X, y);
      teacher_ = distillation_targets(primal_, X);
      if (task == Task::classification) shape.classes = primal_.num_classes();
      return with_strategy(instantiate(entry_.proxy, shape, proxy_overrides_from(primal_)),
                           MappingStrategy::approximate);
    }
    teacher_ = Matrix();
    return universal_proxy(shape, universal_hidden_);
  }();
  const Matrix targets = strategy_ == MappingStrategy::approximate ? teacher_ : encode_targets(y, task, shape.classes);

  std::optional<SearchResult> result;
  TrainedProxy trained = [&] {
    if (space) {
      result = search(desc, X, targets, *space, train_, train_.seed);
      auto [best_desc, best_cfg] = apply_config(desc, train_, result->best_config);
      best_cfg.seed = train_.seed;
      return train_proxy(best_desc, X, targets, best_cfg);
    }
    return train_proxy(desc, X, targets, train_);
  }();
  if (trained.diverged) throw NumericError("proxy training diverged (non-finite loss)");
  configs_evaluated_ = result ? result->trials.size() : 1;
  search_ = std::move(result);
  history_ = trained.history;
  proxy_ = std::move(trained);
  return *this;
}

Matrix DopedModel::decision_scores(const Matrix& X) const {
  require_fitted("predict");
  if (X.cols() != proxy_->descriptor.input_width()) {
    throw DimensionError("model expects " + std::to_string(proxy_->descriptor.input_width()) + " features, got " +
                         std::to_string(X.cols()));
  }
  return proxy_->forward(X);
}

std::vector<double> DopedModel::predict(const Matrix& X) const {
  return decode_outputs(decision_scores(X), proxy_ && proxy_->descriptor.is_classifier());
}

std::array<double, 2> DopedModel::score(const Matrix& X, const std::vector<double>& y) const {
  require_fitted("score");
  if (X.rows() != y.size()) {
    throw DimensionError("X has " + std::to_string(X.rows()) + " rows but y has " + std::to_string(y.size()));
  }
  if (X.rows() == 0) throw InputError("cannot score an empty matrix");
  const auto& desc = proxy_->descriptor;
  const bool classifier = desc.is_classifier();
  const Matrix out = decision_scores(X);
  const Matrix targets = encode_targets(y, classifier ? Task::classification : Task::regression, desc.output_width());
  const double loss = loss_eval(desc.loss(), targets, out);
  const auto pred = decode_outputs(out, classifier);
  return {loss, classifier ? accuracy(y, pred) : r2_score(y, pred)};
}

NativeModelDoc DopedModel::to_native() const {
  require_fitted("save");
  NativeMetadata meta;
  meta.primal_family = std::string(to_string(primal_.family()));
  meta.strategy = strategy_;
  meta.seed = train_.seed;
  meta.train_config = train_;
  meta.task = primal_.task();
  meta.registry_version = entry_.version;
  return NativeModelDoc{proxy_->descriptor, proxy_->weights, std::move(meta)};
}

DopedModel DopedModel::from_native(const NativeModelDoc& doc, const Registry& registry) {
  const Family family = parse_family(doc.metadata.primal_family);
  auto entry = registry.lookup(registry_key_of(family), doc.metadata.registry_version);
  DopeOptions opts;
  opts.train = doc.metadata.train_config;
  DopedModel m(PrimalModel(family), std::move(entry), doc.metadata.strategy, std::move(opts));
  check_weights(doc.descriptor, doc.weights);
  m.proxy_ = TrainedProxy{doc.descriptor, doc.weights, {}, false};
  return m;
}

void DopedModel::save(const std::string& filename) const {
  require_fitted("save");
  if (filename.empty()) throw InputError("save needs a file name");
  const auto graph = build_graph(proxy_->descriptor, proxy_->weights);
  write_text_file(filename + ".onnx", serialize(graph));
  save_native(to_native(), filename + ".json");
}

DopedModel dope(const PrimalModel& primal, const DopeOptions& options, const Registry& registry) {
  auto entry = registry.lookup(primal.registry_key(), options.version);
  const bool glm = is_glm(primal.family());
  MappingStrategy strategy = options.strategy.value_or(glm && primal.fitted() ? MappingStrategy::exact
                                                                              : MappingStrategy::approximate);
  if (strategy == MappingStrategy::exact && !glm) {
    throw UnsupportedMapError("the exact map needs a linear model; " + primal.registry_key().str() +
                              " supports approximate or universal");
  }
  DopedModel model(primal, std::move(entry), strategy, options);
  if (strategy == MappingStrategy::exact && primal.fitted()) {
    if (options.params && !options.params->empty()) {
      throw ConfigError("the exact map copies weights and takes no search parameters");
    }
    auto desc = with_strategy(instantiate(model.entry_.proxy,
                                          DataShape{0, primal.num_features(),
                                                    primal.task() == Task::classification ? primal.num_classes() : 0},
                                          proxy_overrides_from(primal)),
                              MappingStrategy::exact);
    auto weights = transfer_exact(primal, desc);
    model.proxy_ = TrainedProxy{std::move(desc), std::move(weights), {}, false};
  }
  return model;
}

}  // namespace doppel
