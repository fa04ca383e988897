#include "doppel/nas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "doppel/errors.hpp"

namespace doppel {

namespace {

ParamValue to_param(const nlohmann::json& v, const std::string& name) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  throw ConfigError("search candidate for '" + name + "' must be a number or a string");
}

}  // namespace

SearchSpace parse_search_space(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("search space is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("search space must be a JSON object");
  SearchSpace space;
  for (const auto& [name, spec] : doc.items()) {
    std::vector<ParamValue> candidates;
    if (spec.is_object()) {
      if (!spec.contains("grid_search") || spec.size() != 1) {
        throw ConfigError("parameter '" + name + "' must use {\"grid_search\": [...]}");
      }
      const auto& list = spec.at("grid_search");
      if (!list.is_array()) throw ConfigError("grid_search for '" + name + "' must be a list");
      for (const auto& v : list) candidates.push_back(to_param(v, name));
    } else if (spec.is_array()) {
      for (const auto& v : spec) candidates.push_back(to_param(v, name));
    } else {
      candidates.push_back(to_param(spec, name));
    }
    if (candidates.empty()) throw ConfigError("parameter '" + name + "' has no candidates");
    space.entries[name] = std::move(candidates);
  }
  return space;
}

const std::vector<std::string>& train_param_names() {
  static const std::vector<std::string> names{"batch_size", "epochs", "learning_rate", "optimizer"};
  return names;
}

std::vector<ParamMap> expand_grid(const SearchSpace& space) {
  std::size_t total = 1;
  for (const auto& [name, candidates] : space.entries) {
    if (candidates.empty()) throw ConfigError("parameter '" + name + "' has no candidates");
    total *= candidates.size();
    if (total > kMaxTrials) {
      throw ConfigError("search grid exceeds the budget of " + std::to_string(kMaxTrials) + " trials");
    }
  }
  std::vector<ParamMap> grid(1);
  for (const auto& [name, candidates] : space.entries) {
    std::vector<ParamMap> next;
    next.reserve(grid.size() * candidates.size());
    for (const auto& partial : grid) {
      for (const auto& c : candidates) {
        ParamMap m = partial;
        m[name] = c;
        next.push_back(std::move(m));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

std::vector<ParamMap> expand_grid(const SearchSpace& space, const ProxyDescriptor& proxy) {
  std::set<std::string> allowed(train_param_names().begin(), train_param_names().end());
  for (const auto& n : architecture_param_names(proxy)) allowed.insert(n);
  for (const auto& [name, candidates] : proxy.searchable_params()) allowed.insert(name);
  for (const auto& [name, candidates] : space.entries) {
    if (!allowed.contains(name)) {
      std::string known;
      for (const auto& a : allowed) known += (known.empty() ? "" : ", ") + a;
      throw ConfigError("unknown search parameter '" + name + "' for proxy '" + proxy.name() + "' (known: " + known + ")");
    }
  }
  return expand_grid(space);
}

std::pair<ProxyDescriptor, TrainConfig> apply_config(const ProxyDescriptor& proxy, const TrainConfig& base,
                                                     const ParamMap& config) {
  TrainConfig tc = base;
  ParamMap arch;
  for (const auto& [name, value] : config) {
    if (name == "optimizer") {
      tc.optimizer = parse_optimizer(as_text(value, name));
    } else if (name == "learning_rate") {
      tc.learning_rate = as_number(value, name);
    } else if (name == "epochs" || name == "batch_size") {
      const double v = as_number(value, name);
      if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("'" + name + "' must be a positive integer");
      (name == "epochs" ? tc.epochs : tc.batch_size) = static_cast<std::size_t>(v);
    } else {
      arch[name] = value;
    }
  }
  tc.validate();
  return {with_params(proxy, arch), tc};
}

ValidationSplit validation_split(const Matrix& targets, bool classifier, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InputError("validation_fraction must lie in (0, 1) to hold out validation rows");
  }
  const std::size_t n = targets.rows();
  Rng rng(seed);
  ValidationSplit split;
  if (classifier) {
    const auto labels = argmax_rows(targets);
    std::map<double, std::vector<std::size_t>> by_class;
    for (std::size_t r = 0; r < n; ++r) by_class[labels[r]].push_back(r);
    for (auto& [label, rows] : by_class) {
      rng.shuffle(std::span<std::size_t>(rows));
      const auto held = static_cast<std::size_t>(std::llround(static_cast<double>(rows.size()) * fraction));
      split.validation.insert(split.validation.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(held));
      split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(held), rows.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
  } else {
    const auto perm = rng.permutation(n);
    const auto held = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    split.train.assign(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(held));
    split.validation.assign(perm.end() - static_cast<std::ptrdiff_t>(held), perm.end());
  }
  if (split.validation.empty()) {
    throw InputError("validation_fraction " + std::to_string(fraction) + " leaves no validation rows out of " +
                     std::to_string(n));
  }
  if (split.train.empty()) throw InputError("validation split leaves no training rows");
  return split;
}

SearchResult search(const ProxyDescriptor& proxy, const Matrix& X, const Matrix& targets,
                    const SearchSpace& space, const TrainConfig& base, std::uint64_t seed) {
  const auto grid = expand_grid(space, proxy);
  const bool classifier = proxy.is_classifier();
  const auto split = validation_split(targets, classifier, base.validation_fraction, seed);
  const Matrix X_train = X.select_rows(split.train);
  const Matrix Y_train = targets.select_rows(split.train);
  const Matrix X_val = X.select_rows(split.validation);
  const Matrix Y_val = targets.select_rows(split.validation);
  const auto val_truth = decode_outputs(Y_val, classifier);

  SearchResult result;
  result.best_val_metric = -std::numeric_limits<double>::infinity();
  bool any_ok = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto [desc, tc] = apply_config(proxy, base, grid[i]);
    tc.seed = seed;
    Trial trial{grid[i], -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), false};
    const auto trained = train_proxy(desc, X_train, Y_train, tc);
    if (trained.diverged) {
      trial.diverged = true;
    } else {
      const Matrix out = trained.forward(X_val);
      trial.val_loss = loss_eval(desc.loss(), Y_val, out);
      const auto pred = decode_outputs(out, classifier);
      trial.val_metric = classifier ? accuracy(val_truth, pred) : r2_score(val_truth, pred);
      if (!std::isfinite(trial.val_loss) || !std::isfinite(trial.val_metric)) trial.diverged = true;
    }
    if (!trial.diverged && (!any_ok || trial.val_metric > result.best_val_metric)) {
      any_ok = true;
      result.best_val_metric = trial.val_metric;
      result.best_index = i;
      result.best_config = grid[i];
    }
    result.trials.push_back(std::move(trial));
  }
  if (!any_ok) {
    std::string listing;
    for (const auto& t : result.trials) {
      std::string cfg;
      for (const auto& [k, v] : t.config) cfg += (cfg.empty() ? "" : ",") + k + "=" + to_string(v);
      listing += " {" + cfg + "}";
    }
    throw SearchFailure("every search trial diverged:" + listing);
  }
  return result;
}

}  // namespace doppel
