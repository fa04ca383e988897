#include "doppel/primal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doppel/errors.hpp"
#include "doppel/numcore.hpp"

namespace doppel {

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::linear: return "linear";
    case Family::ridge: return "ridge";
    case Family::lasso: return "lasso";
    case Family::elasticnet: return "elasticnet";
    case Family::logistic: return "logistic";
    case Family::linear_svc: return "linear_svc";
    case Family::decision_tree: return "decision_tree";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "linear" || name == "linear_regression" || name == "LinearRegression") return Family::linear;
  if (name == "ridge" || name == "Ridge") return Family::ridge;
  if (name == "lasso" || name == "Lasso") return Family::lasso;
  if (name == "elasticnet" || name == "elastic_net" || name == "ElasticNet") return Family::elasticnet;
  if (name == "logistic" || name == "logistic_regression" || name == "LogisticRegression") return Family::logistic;
  if (name == "linear_svc" || name == "svc" || name == "LinearSVC") return Family::linear_svc;
  if (name == "decision_tree" || name == "cart" || name == "DecisionTreeClassifier") return Family::decision_tree;
  throw LookupError("unknown model family '" + std::string(name) +
                    "' (known: linear, ridge, lasso, elasticnet, logistic, linear_svc, decision_tree)");
}

Task task_of(Family f) noexcept {
  switch (f) {
    case Family::logistic:
    case Family::linear_svc:
    case Family::decision_tree:
      return Task::classification;
    default:
      return Task::regression;
  }
}

bool is_glm(Family f) noexcept {
  return f != Family::linear_svc && f != Family::decision_tree;
}

RegistryKey registry_key_of(Family f) {
  switch (f) {
    case Family::linear: return {"linear_model", "LinearRegression"};
    case Family::ridge: return {"linear_model", "Ridge"};
    case Family::lasso: return {"linear_model", "Lasso"};
    case Family::elasticnet: return {"linear_model", "ElasticNet"};
    case Family::logistic: return {"linear_model", "LogisticRegression"};
    case Family::linear_svc: return {"svm", "LinearSVC"};
    case Family::decision_tree: return {"tree", "DecisionTreeClassifier"};
  }
  return {};
}

Hyperparams default_hyperparams(Family f) {
  switch (f) {
    case Family::ridge:
    case Family::lasso:
      return {{"alpha", 1.0}};
    case Family::elasticnet:
      return {{"alpha", 1.0}, {"l1_ratio", 0.5}};
    case Family::logistic:
    case Family::linear_svc:
      return {{"C", 1.0}};
    default:
      return {};
  }
}

namespace {

void check_xy(const Matrix& X, std::size_t y_size) {
  if (X.rows() == 0 || X.cols() == 0) throw InputError("empty training data");
  if (X.rows() != y_size) {
    throw DimensionError("X has " + std::to_string(X.rows()) + " rows but y has " +
                         std::to_string(y_size));
  }
  if (!X.all_finite()) throw InputError("training data contains non-finite values");
}

std::size_t check_classification_labels(const std::vector<double>& y) {
  const std::size_t k = count_classes(y);
  const std::set<double> distinct(y.begin(), y.end());
  if (distinct.size() < 2) throw InputError("classification needs at least 2 distinct classes in y");
  return k;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// ---- linear family ------------------------------------------------------

void solve_normal_equations(const Matrix& X, const std::vector<double>& y, double alpha,
                            bool allow_jitter, Matrix& coef, std::vector<double>& intercept,
                            FitReport& report) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  const std::size_t p = d + 1;  // intercept is the last unknown
  Matrix a(p, p);
  std::vector<double> rhs(p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = X.row_span(r);
    for (std::size_t i = 0; i < p; ++i) {
      const double xi = i < d ? x[i] : 1.0;
      rhs[i] += xi * y[r];
      for (std::size_t j = i; j < p; ++j) a(i, j) += xi * (j < d ? x[j] : 1.0);
    }
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  for (std::size_t i = 0; i < d; ++i) a(i, i) += alpha;

  std::vector<double> sol;
  if (!solve_linear(a, rhs, sol)) {
    if (!allow_jitter) throw NumericError("normal equations are singular");
    // Rank-deficient design: fall back to a minimally regularized solve.
    for (std::size_t i = 0; i < d; ++i) a(i, i) += 1e-10;
    if (!solve_linear(a, rhs, sol, 0.0)) throw NumericError("normal equations are singular");
    report.used_jitter = true;
  }
  coef = Matrix(1, d, std::vector<double>(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(d)));
  intercept = {sol[d]};
  report.converged = true;
  report.iterations = 1;
}

void coordinate_descent(const Matrix& X, const std::vector<double>& y, double alpha, double rho,
                        Matrix& coef, std::vector<double>& intercept, FitReport& report) {
  constexpr double kTol = 1e-6;
  constexpr std::size_t kMaxSweeps = 1000;
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> col_sq(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) col_sq[j] += X(r, j) * X(r, j) * inv_n;

  std::vector<double> w(d, 0.0);
  double b = std::accumulate(y.begin(), y.end(), 0.0) * inv_n;
  std::vector<double> resid(n);
  for (std::size_t r = 0; r < n; ++r) resid[r] = y[r] - b;

  const double l1 = alpha * rho;
  const double l2 = alpha * (1.0 - rho);
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double old = w[j];
      double updated = 0.0;
      if (col_sq[j] > 0.0) {
        double corr = 0.0;
        for (std::size_t r = 0; r < n; ++r) corr += X(r, j) * resid[r];
        corr = corr * inv_n + col_sq[j] * old;
        updated = soft_threshold(corr, l1) / (col_sq[j] + l2);
      }
      const double delta = updated - old;
      if (delta != 0.0) {
        for (std::size_t r = 0; r < n; ++r) resid[r] -= delta * X(r, j);
        w[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    const double shift = std::accumulate(resid.begin(), resid.end(), 0.0) * inv_n;
    b += shift;
    for (double& r : resid) r -= shift;
    max_change = std::max(max_change, std::abs(shift));

    report.iterations = sweep + 1;
    report.objective_trace.push_back(elastic_objective(X, y, w, b, alpha, rho));
    if (max_change < kTol) {
      report.converged = true;
      break;
    }
  }
  coef = Matrix(1, d, std::move(w));
  intercept = {b};
}

// ---- logistic regression --------------------------------------------------

// Binary logistic loss with the intercept appended as a penalized unit
// feature: ½‖θ‖² + C Σ log(1 + exp(−tᵢ θ·zᵢ)), solved by damped Newton.
bool fit_binary_logistic(const Matrix& X, const std::vector<double>& t, double c, std::vector<double>& theta,
                         std::size_t& iterations) {
  const std::size_t n = X.rows();
  const std::size_t p = X.cols() + 1;
  theta.assign(p, 0.0);
  const auto z = [&](std::size_t r, std::size_t j) { return j + 1 < p ? X(r, j) : 1.0; };
  const auto objective = [&](const std::vector<double>& th) {
    double f = 0.0;
    for (double v : th) f += 0.5 * v * v;
    for (std::size_t r = 0; r < n; ++r) {
      double m = 0.0;
      for (std::size_t j = 0; j < p; ++j) m += th[j] * z(r, j);
      m *= t[r];
      f += c * (m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)));
    }
    return f;
  };
  double current = objective(theta);
  for (iterations = 0; iterations < 100; ++iterations) {
    std::vector<double> grad(theta);
    Matrix hess = Matrix::identity(p);
    for (std::size_t r = 0; r < n; ++r) {
      double m = 0.0;
      for (std::size_t j = 0; j < p; ++j) m += theta[j] * z(r, j);
      const double s = 1.0 / (1.0 + std::exp(-t[r] * m));
      const double g = -c * t[r] * (1.0 - s);
      const double h = c * s * (1.0 - s);
      for (std::size_t i = 0; i < p; ++i) {
        grad[i] += g * z(r, i);
        for (std::size_t j = i; j < p; ++j) hess(i, j) += h * z(r, i) * z(r, j);
      }
    }
    double gnorm = 0.0;
    for (double v : grad) gnorm += v * v;
    if (std::sqrt(gnorm) < 1e-9) return true;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < i; ++j) hess(i, j) = hess(j, i);
    std::vector<double> step;
    if (!solve_linear(hess, grad, step)) throw NumericError("logistic Newton system is singular");
    double slope = 0.0;
    for (std::size_t i = 0; i < p; ++i) slope += grad[i] * step[i];
    double scale = 1.0;
    std::vector<double> trial(p);
    double next = current;
    for (int halvings = 0; halvings < 50; ++halvings) {
      for (std::size_t i = 0; i < p; ++i) trial[i] = theta[i] - scale * step[i];
      next = objective(trial);
      if (next <= current - 1e-4 * scale * slope) break;
      scale *= 0.5;
    }
    if (!(next <= current)) return false;
    theta = trial;
    current = next;
  }
  return false;
}

// ---- CART -------------------------------------------------------------------

double gini(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 1.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s -= p * p;
  }
  return s;
}

struct CartBuilder {
  const Matrix& X;
  const std::vector<double>& y;
  std::size_t num_classes;
  std::optional<std::size_t> max_depth;
  std::vector<TreeNode> nodes;

  int build(std::vector<std::size_t> rows, std::size_t depth) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto r : rows) ++counts[static_cast<std::size_t>(y[r])];

    TreeNode node;
    node.depth = depth;
    node.leaf_distribution.resize(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k)
      node.leaf_distribution[k] = static_cast<double>(counts[k]) / static_cast<double>(rows.size());
    node.leaf_class = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());

    const int index = static_cast<int>(nodes.size());
    nodes.push_back(node);

    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (pure || (max_depth && depth >= *max_depth) || rows.size() < 2) return index;

    const double parent = gini(counts, rows.size());
    bool found = false;
    double best_gain = 0.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;

    std::vector<std::size_t> order = rows;
    std::vector<std::size_t> left(num_classes);
    std::vector<std::size_t> right(num_classes);
    for (std::size_t f = 0; f < X.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return X(a, f) < X(b, f); });
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto k = static_cast<std::size_t>(y[order[i]]);
        ++left[k];
        --right[k];
        const double lo = X(order[i], f);
        const double hi = X(order[i + 1], f);
        if (!(lo < hi)) continue;
        double threshold = lo + (hi - lo) / 2.0;
        if (!(threshold < hi)) threshold = lo;
        const std::size_t nl = i + 1;
        const std::size_t nr = order.size() - nl;
        const double total = static_cast<double>(order.size());
        const double gain = parent - (static_cast<double>(nl) / total) * gini(left, nl) -
                            (static_cast<double>(nr) / total) * gini(right, nr);
        // Strict improvement keeps the lowest feature, then lowest threshold.
        if (!found || gain > best_gain + 1e-12) {
          found = true;
          best_gain = gain;
          best_feature = f;
          best_threshold = threshold;
        }
      }
    }
    if (!found) return index;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (auto r : rows) (X(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    nodes[static_cast<std::size_t>(index)].feature_index = best_feature;
    nodes[static_cast<std::size_t>(index)].threshold = best_threshold;
    nodes[static_cast<std::size_t>(index)].leaf_class.reset();
    const int l = build(std::move(left_rows), depth + 1);
    const int r = build(std::move(right_rows), depth + 1);
    nodes[static_cast<std::size_t>(index)].left = l;
    nodes[static_cast<std::size_t>(index)].right = r;
    return index;
  }
};

}  // namespace

double elastic_objective(const Matrix& X, const std::vector<double>& y, std::span<const double> w,
                         double b, double alpha, double rho) {
  const std::size_t n = X.rows();
  double rss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double pred = b;
    const auto x = X.row_span(r);
    for (std::size_t j = 0; j < w.size(); ++j) pred += x[j] * w[j];
    rss += (y[r] - pred) * (y[r] - pred);
  }
  double l1 = 0.0;
  double l2 = 0.0;
  for (double v : w) {
    l1 += std::abs(v);
    l2 += v * v;
  }
  return rss / (2.0 * static_cast<double>(n)) + alpha * (rho * l1 + 0.5 * (1.0 - rho) * l2);
}

std::vector<double> argmax_rows(const Matrix& scores) {
  std::vector<double> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row_span(r);
    out[r] = static_cast<double>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double r2_score(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) throw DimensionError("r2_score: length mismatch");
  const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

double accuracy(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) throw DimensionError("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

PrimalModel::PrimalModel(Family family, Hyperparams overrides)
    : family_(family), hyperparams_(default_hyperparams(family)) {
  for (auto& [name, value] : overrides) {
    if (!std::isfinite(value)) throw ConfigError("hyperparameter '" + name + "' is not finite");
    hyperparams_[name] = value;
  }
  if (auto it = hyperparams_.find("alpha"); it != hyperparams_.end() && it->second < 0.0)
    throw ConfigError("alpha must be >= 0");
  if (auto it = hyperparams_.find("l1_ratio"); it != hyperparams_.end() && (it->second < 0.0 || it->second > 1.0))
    throw ConfigError("l1_ratio must lie in [0, 1]");
  if (auto it = hyperparams_.find("C"); it != hyperparams_.end() && !(it->second > 0.0))
    throw ConfigError("C must be positive");
  if (auto it = hyperparams_.find("max_depth"); it != hyperparams_.end() && !(it->second >= 1.0))
    throw ConfigError("max_depth must be >= 1");
}

double PrimalModel::hyperparam(std::string_view name) const {
  const auto it = hyperparams_.find(std::string(name));
  if (it == hyperparams_.end()) {
    throw LookupError("model '" + std::string(to_string(family_)) + "' has no hyperparameter '" +
                      std::string(name) + "'");
  }
  return it->second;
}

void PrimalModel::require_fitted(const char* what) const {
  if (!fitted_) throw StateError(std::string(what) + " called on an unfitted " + std::string(to_string(family_)) + " model");
}

void PrimalModel::check_features(const Matrix& X) const {
  if (X.cols() != num_features_) {
    throw DimensionError("model was fitted on " + std::to_string(num_features_) +
                         " features, got " + std::to_string(X.cols()));
  }
}

void PrimalModel::fit(const Matrix& X, const std::vector<double>& y) {
  check_xy(X, y.size());
  for (double v : y)
    if (!std::isfinite(v)) throw InputError("targets contain non-finite values");
  report_ = {};
  tree_.clear();
  num_features_ = X.cols();
  num_classes_ = 0;

  switch (family_) {
    case Family::linear:
      solve_normal_equations(X, y, 0.0, true, coefficients_, intercepts_, report_);
      break;
    case Family::ridge: {
      const double alpha = hyperparam("alpha");
      solve_normal_equations(X, y, alpha, alpha == 0.0, coefficients_, intercepts_, report_);
      break;
    }
    case Family::lasso:
      coordinate_descent(X, y, hyperparam("alpha"), 1.0, coefficients_, intercepts_, report_);
      break;
    case Family::elasticnet:
      coordinate_descent(X, y, hyperparam("alpha"), hyperparam("l1_ratio"), coefficients_,
                         intercepts_, report_);
      break;
    case Family::logistic: {
      num_classes_ = check_classification_labels(y);
      const double c = hyperparam("C");
      const std::size_t outputs = num_classes_ == 2 ? 1 : num_classes_;
      coefficients_ = Matrix(outputs, X.cols());
      intercepts_.assign(outputs, 0.0);
      report_.converged = true;
      std::vector<double> t(X.rows());
      for (std::size_t k = 0; k < outputs; ++k) {
        const double positive = outputs == 1 ? 1.0 : static_cast<double>(k);
        for (std::size_t r = 0; r < X.rows(); ++r) t[r] = y[r] == positive ? 1.0 : -1.0;
        std::vector<double> theta;
        std::size_t iterations = 0;
        report_.converged = fit_binary_logistic(X, t, c, theta, iterations) && report_.converged;
        report_.iterations = std::max(report_.iterations, iterations);
        for (std::size_t j = 0; j < X.cols(); ++j) coefficients_(k, j) = theta[j];
        intercepts_[k] = theta.back();
      }
      break;
    }
    case Family::linear_svc: {
      num_classes_ = check_classification_labels(y);
      const double c = hyperparam("C");
      const std::size_t outputs = num_classes_ == 2 ? 1 : num_classes_;
      const std::size_t n = X.rows();
      const std::size_t d = X.cols();
      double sq_norms = static_cast<double>(n);
      for (double v : X.values()) sq_norms += v * v;
      const double eta0 = 10.0 / (1.0 + c * sq_norms);

      coefficients_ = Matrix(outputs, d);
      intercepts_.assign(outputs, 0.0);
      std::vector<double> t(n);
      for (std::size_t k = 0; k < outputs; ++k) {
        const double positive = outputs == 1 ? 1.0 : static_cast<double>(k);
        for (std::size_t r = 0; r < n; ++r) t[r] = y[r] == positive ? 1.0 : -1.0;
        std::vector<double> w(d, 0.0);
        double b = 0.0;
        std::vector<double> best_w = w;
        double best_b = 0.0;
        double best_obj = std::numeric_limits<double>::infinity();
        std::vector<double> gw(d);
        // Full-batch subgradient descent on ½‖w‖² + C Σ hinge, keeping the best iterate.
        for (std::size_t it = 1; it <= 2000; ++it) {
          double hinge = 0.0;
          std::copy(w.begin(), w.end(), gw.begin());
          double gb = 0.0;
          for (std::size_t r = 0; r < n; ++r) {
            const auto x = X.row_span(r);
            double f = b;
            for (std::size_t j = 0; j < d; ++j) f += w[j] * x[j];
            const double margin = t[r] * f;
            if (margin < 1.0) {
              hinge += 1.0 - margin;
              for (std::size_t j = 0; j < d; ++j) gw[j] -= c * t[r] * x[j];
              gb -= c * t[r];
            }
          }
          double sq = 0.0;
          for (double v : w) sq += v * v;
          const double obj = 0.5 * sq + c * hinge;
          if (obj < best_obj) {
            best_obj = obj;
            best_w = w;
            best_b = b;
          }
          const double eta = eta0 / std::sqrt(static_cast<double>(it));
          for (std::size_t j = 0; j < d; ++j) w[j] -= eta * gw[j];
          b -= eta * gb;
        }
        for (std::size_t j = 0; j < d; ++j) coefficients_(k, j) = best_w[j];
        intercepts_[k] = best_b;
      }
      report_.iterations = 2000;
      report_.converged = true;
      break;
    }
    case Family::decision_tree: {
      num_classes_ = count_classes(y);
      std::optional<std::size_t> depth;
      if (auto it = hyperparams_.find("max_depth"); it != hyperparams_.end())
        depth = static_cast<std::size_t>(it->second);
      CartBuilder builder{X, y, num_classes_, depth, {}};
      std::vector<std::size_t> rows(X.rows());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      builder.build(std::move(rows), 0);
      tree_ = std::move(builder.nodes);
      coefficients_ = Matrix();
      intercepts_.clear();
      report_.converged = true;
      break;
    }
  }
  if (!coefficients_.all_finite()) throw NumericError("fitted coefficients are not finite");
  fitted_ = true;
}

Matrix PrimalModel::decision_function(const Matrix& X) const {
  require_fitted("decision_function");
  check_features(X);
  if (family_ == Family::decision_tree) throw UnsupportedMapError("decision trees have no linear decision function");
  return dense_forward(coefficients_, intercepts_, X, Activation::identity);
}

bool PrimalModel::has_probabilities() const noexcept {
  return family_ == Family::logistic || family_ == Family::decision_tree;
}

std::size_t PrimalModel::leaf_index(std::span<const double> x) const {
  require_fitted("leaf_index");
  if (family_ != Family::decision_tree) throw UnsupportedMapError("leaf_index requires a decision tree");
  std::size_t at = 0;
  while (!tree_[at].is_leaf()) {
    const auto& node = tree_[at];
    at = static_cast<std::size_t>(x[node.feature_index] <= node.threshold ? node.left : node.right);
  }
  return at;
}

Matrix PrimalModel::predict_proba(const Matrix& X) const {
  require_fitted("predict_proba");
  check_features(X);
  if (family_ == Family::decision_tree) {
    Matrix out(X.rows(), num_classes_);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      const auto& dist = tree_[leaf_index(X.row_span(r))].leaf_distribution;
      std::copy(dist.begin(), dist.end(), out.row_span(r).begin());
    }
    return out;
  }
  if (family_ != Family::logistic) {
    throw UnsupportedMapError("model '" + std::string(to_string(family_)) + "' has no class probabilities");
  }
  if (num_classes_ == 2) {
    const Matrix p1 = dense_forward(coefficients_, intercepts_, X, Activation::sigmoid);
    Matrix out(X.rows(), 2);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      out(r, 0) = 1.0 - p1(r, 0);
      out(r, 1) = p1(r, 0);
    }
    return out;
  }
  // One-vs-rest: per-class sigmoids renormalized to sum to one.
  Matrix out = dense_forward(coefficients_, intercepts_, X, Activation::sigmoid);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    double sum = 0.0;
    for (double v : row) sum += v;
    for (double& v : row) v /= sum;
  }
  return out;
}

std::vector<double> PrimalModel::predict(const Matrix& X) const {
  require_fitted("predict");
  check_features(X);
  switch (family_) {
    case Family::decision_tree:
      return argmax_rows(predict_proba(X));
    case Family::logistic:
    case Family::linear_svc: {
      const Matrix s = decision_function(X);
      if (s.cols() == 1) {
        std::vector<double> out(s.rows());
        for (std::size_t r = 0; r < s.rows(); ++r) out[r] = s(r, 0) > 0.0 ? 1.0 : 0.0;
        return out;
      }
      return argmax_rows(s);
    }
    default: {
      const Matrix s = decision_function(X);
      return s.column_copy(0);
    }
  }
}

double PrimalModel::score(const Matrix& X, const std::vector<double>& y) const {
  const auto pred = predict(X);
  if (pred.size() != y.size()) throw DimensionError("score: X and y row counts differ");
  return task() == Task::regression ? r2_score(y, pred) : accuracy(y, pred);
}

PrimalModel PrimalModel::from_parameters(Family family, Hyperparams hyperparams,
                                         std::size_t num_features, std::size_t num_classes,
                                         Matrix coefficients, std::vector<double> intercepts,
                                         std::vector<TreeNode> tree) {
  PrimalModel m(family, std::move(hyperparams));
  if (num_features == 0) throw InputError("stored model has zero features");
  if (family == Family::decision_tree) {
    if (tree.empty()) throw InputError("stored tree has no nodes");
    for (const auto& node : tree) {
      const bool has_left = node.left >= 0;
      const bool has_right = node.right >= 0;
      if (has_left != has_right) throw InputError("tree node has exactly one child");
      if (has_left && (static_cast<std::size_t>(node.left) >= tree.size() ||
                       static_cast<std::size_t>(node.right) >= tree.size()))
        throw InputError("tree child index out of range");
      if (has_left && node.feature_index >= num_features) throw InputError("tree split feature out of range");
      if (!std::isfinite(node.threshold)) throw InputError("tree threshold is not finite");
    }
  } else {
    if (coefficients.cols() != num_features || coefficients.rows() != intercepts.size() ||
        coefficients.rows() == 0)
      throw InputError("stored coefficients do not match the feature count");
    if (!coefficients.all_finite()) throw InputError("stored coefficients are not finite");
  }
  m.num_features_ = num_features;
  m.num_classes_ = num_classes;
  m.coefficients_ = std::move(coefficients);
  m.intercepts_ = std::move(intercepts);
  m.tree_ = std::move(tree);
  m.fitted_ = true;
  m.report_.converged = true;
  return m;
}

bool operator==(const PrimalModel& a, const PrimalModel& b) {
  return a.family_ == b.family_ && a.hyperparams_ == b.hyperparams_ && a.fitted_ == b.fitted_ &&
         a.num_features_ == b.num_features_ && a.num_classes_ == b.num_classes_ &&
         a.coefficients_ == b.coefficients_ && a.intercepts_ == b.intercepts_ && a.tree_ == b.tree_;
}

PrimalModel fit_linear_family(const Matrix& X, const std::vector<double>& y, Penalty penalty) {
  if (penalty.alpha < 0.0) throw InputError("alpha must be >= 0");
  if (penalty.rho < 0.0 || penalty.rho > 1.0) throw InputError("rho must lie in [0, 1]");
  PrimalModel m = [&] {
    switch (penalty.kind) {
      case Penalty::Kind::none: return PrimalModel(Family::linear);
      case Penalty::Kind::l2: return PrimalModel(Family::ridge, {{"alpha", penalty.alpha}});
      case Penalty::Kind::l1: return PrimalModel(Family::lasso, {{"alpha", penalty.alpha}});
      case Penalty::Kind::elastic:
        return PrimalModel(Family::elasticnet, {{"alpha", penalty.alpha}, {"l1_ratio", penalty.rho}});
    }
    return PrimalModel(Family::linear);
  }();
  m.fit(X, y);
  return m;
}

PrimalModel fit_logistic(const Matrix& X, const std::vector<double>& y, double c) {
  PrimalModel m(Family::logistic, {{"C", c}});
  m.fit(X, y);
  return m;
}

PrimalModel fit_linear_svc(const Matrix& X, const std::vector<double>& y, double c) {
  PrimalModel m(Family::linear_svc, {{"C", c}});
  m.fit(X, y);
  return m;
}

PrimalModel fit_cart(const Matrix& X, const std::vector<double>& y, std::optional<std::size_t> max_depth) {
  Hyperparams h;
  if (max_depth) h["max_depth"] = static_cast<double>(*max_depth);
  PrimalModel m(Family::decision_tree, h);
  m.fit(X, y);
  return m;
}

std::vector<double> predict(const PrimalModel& model, const Matrix& X) { return model.predict(X); }

double score(const PrimalModel& model, const Matrix& X, const std::vector<double>& y) {
  return model.score(X, y);
}

}  // namespace doppel
