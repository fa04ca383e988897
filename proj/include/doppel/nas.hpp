#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "doppel/architectures.hpp"

namespace doppel {

/// Candidate lists per parameter name. std::map keeps names sorted, which
/// fixes the grid order independently of insertion order.
struct SearchSpace {
  std::map<std::string, std::vector<ParamValue>> entries;

  bool empty() const noexcept { return entries.empty(); }
  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;
};

/// Parses `{"optimizer": {"grid_search": ["adam", "nadam"]}}`. A bare value
/// is shorthand for a one-candidate grid.
SearchSpace parse_search_space(std::string_view json_text);

inline constexpr std::size_t kMaxTrials = 64;

/// Names that map onto TrainConfig fields.
const std::vector<std::string>& train_param_names();

/// Cartesian product over names in sorted order, the first name varying
/// slowest. An empty space yields one empty (default) configuration.
std::vector<ParamMap> expand_grid(const SearchSpace& space);
/// As above, rejecting names outside TrainConfig and the descriptor's
/// architecture parameters.
std::vector<ParamMap> expand_grid(const SearchSpace& space, const ProxyDescriptor& proxy);

/// Splits a configuration into its effect on the descriptor and the
/// training settings.
std::pair<ProxyDescriptor, TrainConfig> apply_config(const ProxyDescriptor& proxy, const TrainConfig& base,
                                                     const ParamMap& config);

struct Trial {
  ParamMap config;
  double val_metric = 0.0;
  double val_loss = 0.0;
  bool diverged = false;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct SearchResult {
  ParamMap best_config;
  std::size_t best_index = 0;
  double best_val_metric = 0.0;
  std::vector<Trial> trials;

  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

struct ValidationSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Stratified by class for classifiers (per-class seeded shuffle, round(count ·
/// fraction) rows held out), a seeded shuffle with the tail held out for
/// regressors. Throws InputError when no validation row results.
ValidationSplit validation_split(const Matrix& targets, bool classifier, double fraction, std::uint64_t seed);

/// Trains every grid configuration from the same seeded initialization and
/// keeps the best validation metric (accuracy against argmax targets, or
/// r²), breaking ties toward the earliest grid index.
SearchResult search(const ProxyDescriptor& proxy, const Matrix& X, const Matrix& targets,
                    const SearchSpace& space, const TrainConfig& base, std::uint64_t seed);

}  // namespace doppel
