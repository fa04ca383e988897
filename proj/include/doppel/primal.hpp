#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doppel/data.hpp"
#include "doppel/matrix.hpp"

namespace doppel {

enum class Family { linear, ridge, lasso, elasticnet, logistic, linear_svc, decision_tree };

std::string_view to_string(Family f) noexcept;
/// Accepts snake_case family names ("ridge", "linear_svc", ...) as well as
/// the estimator class names used as registry keys ("Ridge", "LinearSVC").
Family parse_family(std::string_view name);

Task task_of(Family f) noexcept;
/// Families with a closed-form single-layer equivalent.
bool is_glm(Family f) noexcept;

/// (library module, estimator name), e.g. ("linear_model", "Ridge").
struct RegistryKey {
  std::string module_name;
  std::string model_name;

  auto operator<=>(const RegistryKey&) const = default;
  std::string str() const { return "(" + module_name + ", " + model_name + ")"; }
};

RegistryKey registry_key_of(Family f);

using Hyperparams = std::map<std::string, double>;

/// Default hyperparameters for a family: alpha = 1, l1_ratio = 0.5, C = 1. Trees carry no max_depth entry (unlimited).
Hyperparams default_hyperparams(Family f);

struct TreeNode {
  std::size_t feature_index = 0;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::optional<int> leaf_class;
  std::vector<double> leaf_distribution;
  std::size_t depth = 0;

  bool is_leaf() const noexcept { return left < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Penalty {
  enum class Kind { none, l2, l1, elastic };
  Kind kind = Kind::none;
  double alpha = 0.0;
  double rho = 1.0;
};

struct FitReport {
  std::size_t iterations = 0;
  bool converged = false;
  /// Objective after each coordinate-descent sweep (linear family only).
  std::vector<double> objective_trace;
  bool used_jitter = false;
};

/// A fitted (or not yet fitted) classical model. Linear models store one
/// coefficient row per output: a single row for regression and binary
/// classification, K rows for multiclass. Trees are a flat node arena with
/// the root at index 0.
class PrimalModel {
 public:
  explicit PrimalModel(Family family, Hyperparams overrides = {});

  Family family() const noexcept { return family_; }
  Task task() const noexcept { return task_of(family_); }
  RegistryKey registry_key() const { return registry_key_of(family_); }
  const Hyperparams& hyperparams() const noexcept { return hyperparams_; }
  double hyperparam(std::string_view name) const;

  bool fitted() const noexcept { return fitted_; }
  std::size_t num_features() const noexcept { return num_features_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  const Matrix& coefficients() const noexcept { return coefficients_; }
  const std::vector<double>& intercepts() const noexcept { return intercepts_; }
  const std::vector<TreeNode>& tree() const noexcept { return tree_; }
  const FitReport& fit_report() const noexcept { return report_; }

  void fit(const Matrix& X, const std::vector<double>& y);

  /// Labels (as doubles) for classifiers, real values for regressors.
  std::vector<double> predict(const Matrix& X) const;
  /// r² for regressors, accuracy for classifiers.
  double score(const Matrix& X, const std::vector<double>& y) const;
  /// Raw linear scores, one column per coefficient row.
  Matrix decision_function(const Matrix& X) const;
  /// Class probabilities; available for logistic regression and trees.
  Matrix predict_proba(const Matrix& X) const;
  bool has_probabilities() const noexcept;

  /// Index of the leaf reached by each row.
  std::size_t leaf_index(std::span<const double> x) const;

  /// Rebuilds a fitted model from stored parameters (native JSON loading).
  static PrimalModel from_parameters(Family family, Hyperparams hyperparams,
                                     std::size_t num_features, std::size_t num_classes,
                                     Matrix coefficients, std::vector<double> intercepts,
                                     std::vector<TreeNode> tree);

  friend bool operator==(const PrimalModel&, const PrimalModel&);

 private:
  void require_fitted(const char* what) const;
  void check_features(const Matrix& X) const;

  Family family_;
  Hyperparams hyperparams_;
  bool fitted_ = false;
  std::size_t num_features_ = 0;
  std::size_t num_classes_ = 0;
  Matrix coefficients_;
  std::vector<double> intercepts_;
  std::vector<TreeNode> tree_;
  FitReport report_;
};

PrimalModel fit_linear_family(const Matrix& X, const std::vector<double>& y, Penalty penalty);
PrimalModel fit_logistic(const Matrix& X, const std::vector<double>& y, double c = 1.0);
PrimalModel fit_linear_svc(const Matrix& X, const std::vector<double>& y, double c = 1.0);
PrimalModel fit_cart(const Matrix& X, const std::vector<double>& y,
                     std::optional<std::size_t> max_depth = std::nullopt);

std::vector<double> predict(const PrimalModel& model, const Matrix& X);
double score(const PrimalModel& model, const Matrix& X, const std::vector<double>& y);

double r2_score(std::span<const double> y_true, std::span<const double> y_pred);
double accuracy(std::span<const double> y_true, std::span<const double> y_pred);

/// Elastic-net objective (1/2n)‖y − Xw − b‖² + α(ρ‖w‖₁ + (1−ρ)/2 ‖w‖²).
double elastic_objective(const Matrix& X, const std::vector<double>& y,
                         std::span<const double> w, double b, double alpha, double rho);

/// Row-wise argmax with ties resolved to the lowest index.
std::vector<double> argmax_rows(const Matrix& scores);

}  // namespace doppel
