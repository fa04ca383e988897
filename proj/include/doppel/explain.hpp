#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "doppel/primal.hpp"

namespace doppel {

struct Predicate {
  enum class Relation { le, gt };

  std::size_t feature_index = 0;
  Relation relation = Relation::le;
  double threshold = 0.0;

  bool holds(std::span<const double> x) const;
  /// `x[i] <= t` or `x[i] > t`.
  std::string str() const;
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// A decision path: a conjunction of single-predicate clauses.
struct Explanation {
  std::vector<Predicate> clauses;
  double predicted_label = 0.0;
  double surrogate_fidelity = 0.0;

  /// One predicate per line, then `=> label`, then `fidelity=<f>`.
  std::string render() const;
};

using Labeler = std::function<std::vector<double>(const Matrix&)>;

struct Surrogate {
  PrimalModel tree{Family::decision_tree};
  double fidelity = 0.0;
  std::size_t max_depth = 4;
};

inline constexpr std::size_t kDefaultSurrogateDepth = 4;

/// CART fitted to the model's own labels on X.
Surrogate fit_surrogate(const Labeler& model_predict, const Matrix& X,
                        std::size_t max_depth = kDefaultSurrogateDepth);

/// Root-to-leaf path of x through the surrogate.
Explanation explain(const Surrogate& surrogate, std::span<const double> x);

/// Fraction of rows where the surrogate and the model agree.
double fidelity(const PrimalModel& surrogate, const Labeler& model_predict, const Matrix& X);

}  // namespace doppel
