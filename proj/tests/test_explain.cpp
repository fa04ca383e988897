#include <doctest.h>

#include "doppel/data.hpp"
#include "doppel/errors.hpp"
#include "doppel/explain.hpp"
#include "doppel/transpiler.hpp"

using namespace doppel;

namespace {
Labeler constant(double label) {
  return [label](const Matrix& X) { return std::vector<double>(X.rows(), label); };
}
}  // namespace

TEST_CASE("surrogate of a constant model is a single leaf") {
  const Matrix X{{0, 1}, {2, 3}, {4, 5}};
  const auto s = fit_surrogate(constant(2.0), X);
  CHECK(s.fidelity == 1.0);
  CHECK(s.tree.tree().size() == 1);
  const std::vector<double> x{1, 1};
  const auto e = explain(s, x);
  CHECK(e.clauses.empty());
  CHECK(e.predicted_label == 2.0);
  CHECK_THROWS_AS(fit_surrogate(constant(0.0), Matrix()), InputError);
}

TEST_CASE("xor surrogate path at (1,1)") {
  const Matrix X{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const Labeler xor_label = [](const Matrix& M) {
    std::vector<double> out(M.rows());
    for (std::size_t i = 0; i < M.rows(); ++i) out[i] = (M(i, 0) > 0.5) != (M(i, 1) > 0.5) ? 1.0 : 0.0;
    return out;
  };
  const auto s = fit_surrogate(xor_label, X);
  CHECK(s.fidelity == 1.0);
  const std::vector<double> x{1, 1};
  const auto e = explain(s, x);
  REQUIRE(e.clauses.size() == 2);
  CHECK(e.predicted_label == 0.0);
  for (const auto& p : e.clauses) {
    CHECK(p.holds(x));
    CHECK(p.relation == Predicate::Relation::gt);
    CHECK(p.threshold == doctest::Approx(0.5));
  }
  CHECK(e.clauses[0].feature_index != e.clauses[1].feature_index);
  CHECK_THROWS_AS(explain(s, std::vector<double>{1.0}), InputError);
}

TEST_CASE("fidelity bounds") {
  const Matrix X{{0}, {1}, {2}, {3}};
  const auto tree = fit_cart(X, {0, 0, 1, 1});
  const Labeler same = [&](const Matrix& M) { return tree.predict(M); };
  const Labeler flipped = [&](const Matrix& M) {
    auto p = tree.predict(M);
    for (auto& v : p) v = 1.0 - v;
    return p;
  };
  CHECK(fidelity(tree, same, X) == 1.0);
  CHECK(fidelity(tree, flipped, X) == 0.0);
}

TEST_CASE("rendering") {
  Explanation e;
  e.clauses = {{2, Predicate::Relation::le, 2.45}, {0, Predicate::Relation::gt, -1}};
  e.predicted_label = 1;
  e.surrogate_fidelity = 0.96;
  CHECK(e.render() == "x[2] <= 2.45\nx[0] > -1\n=> 1\nfidelity=0.96\n");
}

TEST_CASE("doped tree explanations are sound and complete on iris") {
  const auto iris = builtin("iris");
  Scaler sc;
  const auto split = train_test_split(sc.fit_transform(iris.X), iris.y, 0.6, 0);
  DopeOptions opts;
  auto doped = dope(PrimalModel(Family::decision_tree), opts);
  doped.fit(split.X_train, split.y_train);
  const Labeler model = [&](const Matrix& M) { return doped.predict(M); };
  const auto s = fit_surrogate(model, split.X_train);
  CHECK(s.fidelity >= 0.85);

  Rng rng(0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-2.5, 2.5);
    const auto e = explain(s, x);
    CHECK(e.clauses.size() <= s.max_depth);
    for (const auto& p : e.clauses) CHECK(p.holds(x));
    const auto leaf_of_x = s.tree.leaf_index(x);
    for (std::size_t r = 0; r < split.X_train.rows(); ++r) {
      const auto row = split.X_train.row_span(r);
      bool all = true;
      for (const auto& p : e.clauses) all = all && p.holds(row);
      if (all) CHECK(s.tree.leaf_index(row) == leaf_of_x);
    }
  }
}
