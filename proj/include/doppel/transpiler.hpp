#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "doppel/architectures.hpp"
#include "doppel/nas.hpp"

namespace doppel {

struct NativeModelDoc;

/// A registered proxy. The architecture is kept shape-free and bound to the
/// data when a model is doped or fitted.
struct RegistryEntry {
  RegistryKey key;
  ArchitectureTemplate proxy;
  AdapterKind adapter_kind = AdapterKind::classifier;
  std::string version = "default";

  friend bool operator==(const RegistryEntry&, const RegistryEntry&) = default;
};

class Registry {
 public:
  Registry() = default;
  Registry(const Registry& other);
  Registry& operator=(const Registry& other);

  /// Throws ConflictError when (key, version) is already present.
  void register_entry(RegistryEntry entry);
  /// Omitted version means "default". Throws LookupError listing known keys.
  RegistryEntry lookup(const RegistryKey& key, const std::optional<std::string>& version = std::nullopt) const;
  bool contains(const RegistryKey& key, const std::string& version = "default") const;
  std::vector<RegistryEntry> entries() const;
  std::size_t size() const;

  /// A registry holding the seven shipped estimators.
  static Registry with_builtins();

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::pair<RegistryKey, std::string>, RegistryEntry> entries_;
};

/// Process-wide registry, populated with the built-in estimators.
Registry& default_registry();

struct DopeOptions {
  std::optional<MappingStrategy> strategy;
  std::optional<SearchSpace> params;
  TrainConfig train;
  /// Hidden widths of the universal-map MLP.
  std::vector<std::size_t> universal_hidden{16};
  std::optional<std::string> version;
};

class DopedModel {
 public:
  const PrimalModel& primal() const noexcept { return primal_; }
  MappingStrategy strategy() const noexcept { return strategy_; }
  AdapterKind adapter_kind() const noexcept { return adapter_; }
  const RegistryEntry& entry() const noexcept { return entry_; }
  bool fitted() const noexcept { return proxy_.has_value(); }
  bool is_classifier() const noexcept { return adapter_ == AdapterKind::classifier; }

  /// Requires fitted().
  const TrainedProxy& proxy() const;
  const TrainConfig& train_config() const noexcept { return train_; }
  const std::vector<double>& train_history() const noexcept { return history_; }
  /// Training configurations evaluated by the last fit (0 for weight transfer).
  std::size_t configs_evaluated() const noexcept { return configs_evaluated_; }
  const std::optional<SearchResult>& search_result() const noexcept { return search_; }
  /// Teacher signal of the last approximate fit.
  const Matrix& teacher_targets() const noexcept { return teacher_; }

  /// Fits per strategy: exact refits the primal and copies weights,
  /// approximate distills the refitted primal, universal trains on labels.
  /// A search space triggers a grid search; without one a single default
  /// configuration is trained.
  DopedModel& fit(const Matrix& X, const std::vector<double>& y,
                  const std::optional<SearchSpace>& params = std::nullopt);

  /// [loss, metric]: proxy loss against encoded targets, then accuracy or r².
  std::array<double, 2> score(const Matrix& X, const std::vector<double>& y) const;
  std::vector<double> predict(const Matrix& X) const;
  /// Raw proxy outputs (class scores or the regression column).
  Matrix decision_scores(const Matrix& X) const;

  /// Writes `<filename>.onnx` and `<filename>.json`.
  void save(const std::string& filename) const;

  NativeModelDoc to_native() const;
  static DopedModel from_native(const NativeModelDoc& doc, const Registry& registry = default_registry());

 private:
  friend DopedModel dope(const PrimalModel&, const DopeOptions&, const Registry&);
  DopedModel(PrimalModel primal, RegistryEntry entry, MappingStrategy strategy, DopeOptions options);

  void require_fitted(const char* what) const;

  PrimalModel primal_;
  RegistryEntry entry_;
  MappingStrategy strategy_;
  AdapterKind adapter_;
  TrainConfig train_;
  std::vector<std::size_t> universal_hidden_;
  std::optional<SearchSpace> default_params_;
  std::optional<TrainedProxy> proxy_;
  std::vector<double> history_;
  std::size_t configs_evaluated_ = 0;
  std::optional<SearchResult> search_;
  Matrix teacher_;
};

/// Wraps a primal model (copied, never modified). A fitted GLM under the
/// default or exact strategy is transferred immediately; everything else
/// waits for fit. Default strategy: exact for fitted GLMs, else approximate.
DopedModel dope(const PrimalModel& primal, const DopeOptions& options = {},
                const Registry& registry = default_registry());

/// Returns a copy of the descriptor carrying another mapping strategy.
ProxyDescriptor with_strategy(const ProxyDescriptor& desc, MappingStrategy strategy);

}  // namespace doppel
