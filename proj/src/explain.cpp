#include "doppel/explain.hpp"

#include <cmath>
#include <cstdio>

#include "doppel/errors.hpp"

namespace doppel {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

bool Predicate::holds(std::span<const double> x) const {
  if (feature_index >= x.size()) throw InputError("predicate feature x[" + std::to_string(feature_index) + "] out of range");
  return relation == Relation::le ? x[feature_index] <= threshold : x[feature_index] > threshold;
}

std::string Predicate::str() const {
  return "x[" + std::to_string(feature_index) + "] " + (relation == Relation::le ? "<=" : ">") + " " + fmt(threshold);
}

std::string Explanation::render() const {
  std::string out;
  for (const auto& p : clauses) out += p.str() + "\n";
  out += "=> " + fmt(predicted_label) + "\n";
  out += "fidelity=" + fmt(surrogate_fidelity) + "\n";
  return out;
}

Surrogate fit_surrogate(const Labeler& model_predict, const Matrix& X, std::size_t max_depth) {
  if (X.rows() == 0) throw InputError("surrogate needs at least one row");
  if (max_depth == 0) throw ConfigError("surrogate depth must be >= 1");
  const auto labels = model_predict(X);
  if (labels.size() != X.rows()) {
    throw DimensionError("labeler returned " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(X.rows()) + " rows");
  }
  Surrogate s;
  s.max_depth = max_depth;
  s.tree = fit_cart(X, labels, max_depth);
  s.fidelity = accuracy(labels, s.tree.predict(X));
  return s;
}

Explanation explain(const Surrogate& surrogate, std::span<const double> x) {
  const auto& tree = surrogate.tree;
  if (!tree.fitted()) throw StateError("surrogate is not fitted");
  if (x.size() != tree.num_features()) {
    throw InputError("point has " + std::to_string(x.size()) + " features, surrogate expects " +
                     std::to_string(tree.num_features()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("point holds a non-finite value");
  }
  Explanation e;
  e.surrogate_fidelity = surrogate.fidelity;
  const auto& nodes = tree.tree();
  std::size_t at = 0;
  while (!nodes[at].is_leaf()) {
    const auto& n = nodes[at];
    const bool left = x[n.feature_index] <= n.threshold;
    e.clauses.push_back(Predicate{n.feature_index, left ? Predicate::Relation::le : Predicate::Relation::gt, n.threshold});
    at = static_cast<std::size_t>(left ? n.left : n.right);
  }
  e.predicted_label = static_cast<double>(nodes[at].leaf_class.value_or(0));
  return e;
}

double fidelity(const PrimalModel& surrogate, const Labeler& model_predict, const Matrix& X) {
  if (X.rows() == 0) return 1.0;
  return accuracy(model_predict(X), surrogate.predict(X));
}

}  // namespace doppel
