#include <doctest.h>

#include <cmath>

#include "doppel/data.hpp"
#include "doppel/errors.hpp"
#include "doppel/primal.hpp"
#include "oracles.hpp"

using namespace doppel;

namespace {
std::vector<double> coef_row(const PrimalModel& m) {
  const auto& c = m.coefficients();
  return {c.data().begin(), c.data().begin() + static_cast<std::ptrdiff_t>(c.cols())};
}


Split standard_split(const Dataset& ds) {
  Scaler s;
  return train_test_split(s.fit_transform(ds.X), ds.y, 0.6, 0);
}
}  // namespace

TEST_CASE("linear family hand-solved oracles") {
  const auto line = fit_linear_family(Matrix{{0}, {1}}, {0, 1}, {Penalty::Kind::none});
  CHECK(line.coefficients()(0, 0) == doctest::Approx(1.0));
  CHECK(line.intercepts()[0] == doctest::Approx(0.0));

  const auto ridge = fit_linear_family(Matrix{{1}, {-1}}, {1, -1}, {Penalty::Kind::l2, 1.0});
  CHECK(ridge.coefficients()(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(ridge.intercepts()[0] == doctest::Approx(0.0).epsilon(1e-12));

  const auto lasso = fit_linear_family(Matrix{{1}, {-1}}, {1, -1}, {Penalty::Kind::l1, 0.5, 1.0});
  CHECK(lasso.coefficients()(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("lasso and elastic net satisfy KKT on random problems") {
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    const auto p = oracle::random_regression(rng);
    const double alpha = rng.uniform(0.01, 1.0);
    const double rho = i % 2 == 0 ? 1.0 : rng.uniform(0.1, 0.9);
    const auto m = fit_linear_family(
        p.X, p.y, {rho == 1.0 ? Penalty::Kind::l1 : Penalty::Kind::elastic, alpha, rho});
    CHECK(oracle::kkt_residual(p.X, p.y, coef_row(m), m.intercepts()[0], alpha, rho) <= 1e-4);
  }
}

TEST_CASE("ridge closed form agrees with elastic net at rho 0") {
  Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    const auto p = oracle::random_regression(rng);
    const double alpha = rng.uniform(0.1, 5.0);
    const auto ridge = fit_linear_family(p.X, p.y, {Penalty::Kind::l2, alpha});
    // Ridge penalizes the summed squared error; elastic net the mean.
    const auto en = fit_linear_family(
        p.X, p.y, {Penalty::Kind::elastic, alpha / static_cast<double>(p.X.rows()), 0.0});
    CHECK(oracle::max_abs(coef_row(ridge), coef_row(en)) <= 1e-5);
    CHECK(std::abs(ridge.intercepts()[0] - en.intercepts()[0]) <= 1e-5);
  }
}

TEST_CASE("coordinate descent objective never increases") {
  Rng rng(5);
  const auto p = oracle::random_regression(rng);
  const auto m = fit_linear_family(p.X, p.y, {Penalty::Kind::elastic, 0.3, 0.5});
  const auto& trace = m.fit_report().objective_trace;
  REQUIRE(!trace.empty());
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
  CHECK(m.fit_report().converged);
}

TEST_CASE("logistic oracles") {
  Matrix X(20, 1);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    X(i, 0) = (i < 10 ? -1.0 : 1.0) + 0.01 * static_cast<double>(i % 5);
    y[i] = i < 10 ? 0 : 1;
  }
  const auto sep = fit_logistic(X, y);
  CHECK(sep.score(X, y) == 1.0);

  const auto sym = fit_logistic(Matrix{{-1}, {1}}, {0, 1});
  CHECK(sym.predict_proba(Matrix{{0}})(0, 1) == doctest::Approx(0.5));

  const auto proba = sep.predict_proba(X);
  for (std::size_t r = 0; r < proba.rows(); ++r)
    CHECK(proba(r, 0) + proba(r, 1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_logistic(X, std::vector<double>(20, 1.0)), InputError);
}

TEST_CASE("linear svc separates separable data and is scale invariant on it") {
  Matrix X(12, 2);
  std::vector<double> y(12);
  for (std::size_t i = 0; i < 12; ++i) {
    const double side = i % 2 == 0 ? -1.0 : 1.0;
    X(i, 0) = side * (1.0 + 0.1 * static_cast<double>(i));
    X(i, 1) = 0.05 * static_cast<double>(i);
    y[i] = i % 2 == 0 ? 0 : 1;
  }
  const auto m = fit_linear_svc(X, y);
  const auto scores = m.decision_function(X);
  for (std::size_t i = 0; i < 12; ++i) CHECK((scores(i, 0) > 0) == (y[i] == 1));

  Matrix scaled = X;
  for (auto& v : scaled.values()) v *= 3.0;
  CHECK(fit_linear_svc(scaled, y).predict(scaled) == m.predict(X));
}

TEST_CASE("cart oracles") {
  const auto pure = fit_cart(Matrix{{1}, {2}, {3}}, {1, 1, 1});
  CHECK(pure.tree().size() == 1);
  CHECK(pure.tree()[0].is_leaf());

  const Matrix xor_x{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<double> xor_y{0, 1, 1, 0};
  const auto tree = fit_cart(xor_x, xor_y);
  CHECK(tree.score(xor_x, xor_y) == 1.0);
  std::size_t depth = 0;
  for (const auto& n : tree.tree()) depth = std::max(depth, n.depth);
  CHECK(depth == 2);

  const auto stump = fit_cart(xor_x, xor_y, 1);
  for (const auto& n : stump.tree()) CHECK(n.depth <= 1);
}

TEST_CASE("metrics") {
  CHECK(r2_score(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
  CHECK(r2_score(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}) == doctest::Approx(0.0));
  std::vector<double> truth(10, 1.0), pred(10, 1.0);
  pred[3] = 0.0;
  CHECK(accuracy(truth, pred) == doctest::Approx(0.9));
  CHECK(argmax_rows(Matrix{{0.5, 0.5}, {0.1, 0.9}}) == std::vector<double>{0, 1});
}

TEST_CASE("primal model surface") {
  PrimalModel m(Family::ridge, {{"alpha", 2.0}});
  CHECK(m.hyperparam("alpha") == 2.0);
  CHECK(m.registry_key().model_name == "Ridge");
  CHECK_THROWS_AS(m.predict(Matrix{{1}}), StateError);
  CHECK_THROWS_AS(PrimalModel(Family::ridge, {{"alpha", -1.0}}), ConfigError);
  CHECK(parse_family("LinearSVC") == Family::linear_svc);
  CHECK_THROWS_AS(parse_family("xgboost"), LookupError);
  m.fit(Matrix{{0}, {1}, {2}}, {0, 1, 2});
  CHECK_THROWS_AS(m.predict(Matrix{{1, 2}}), DimensionError);
}

TEST_CASE("reference table primal accuracies on the iris split") {
  const auto split = standard_split(builtin("iris"));
  PrimalModel logistic(Family::logistic), svc(Family::linear_svc), tree(Family::decision_tree);
  logistic.fit(split.X_train, split.y_train);
  svc.fit(split.X_train, split.y_train);
  tree.fit(split.X_train, split.y_train);
  CHECK(std::abs(logistic.score(split.X_test, split.y_test) - 0.82) <= 0.05);
  CHECK(std::abs(svc.score(split.X_test, split.y_test) - 0.91) <= 0.05);
  CHECK(std::abs(tree.score(split.X_test, split.y_test) - 0.93) <= 0.05);
}
