#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "doppel/architectures.hpp"
#include "doppel/data.hpp"
#include "doppel/errors.hpp"
#include "doppel/network.hpp"
#include "doppel/transpiler.hpp"
#include "oracles.hpp"

using namespace doppel;

TEST_CASE("grad_check on every proxy shape") {
  Rng rng(0);
  for (const auto& c : oracle::grad_cases()) {
    CAPTURE(c.label);
    for (int batch = 0; batch < 3; ++batch) {
      const auto weights = init_weights(c.desc, rng);
      const auto [X, Y] = oracle::random_batch(c.desc, 7, rng);
      CHECK(grad_check(c.desc, weights, X, Y) <= 1e-4);
    }
  }
}

TEST_CASE("grad_check is exact for a zero network on zero targets") {
  const ProxyDescriptor d("glm", {LayerSpec::dense(3, 1)}, Activation::identity, LossKind::mse, {},
                          MappingStrategy::exact);
  Rng rng(1);
  auto w = init_weights(d, rng);
  for (auto& b : w) b.value = Matrix(b.value.rows(), b.value.cols());
  const auto [X, Y0] = oracle::random_batch(d, 5, rng);
  const Matrix Y(5, 1);
  const auto lg = proxy_loss_and_gradient(d, w, X, Y);
  CHECK(lg.loss == 0.0);
  for (const auto& g : lg.gradients)
    for (double v : g.values()) CHECK(v == 0.0);
  CHECK(grad_check(d, w, X, Y) <= 1e-12);
}

TEST_CASE("descriptor construction rejects invalid combinations") {
  CHECK_THROWS_AS(ProxyDescriptor("bad", {LayerSpec::dense(3, 2)}, Activation::softmax, LossKind::mse, {},
                                  MappingStrategy::exact),
                  ConfigError);
  CHECK_THROWS_AS(ProxyDescriptor("bad", {LayerSpec::dense(3, 2), LayerSpec::dense(4, 1)},
                                  Activation::identity, LossKind::mse, {}, MappingStrategy::exact),
                  DimensionError);
  CHECK(compatible(Activation::softmax, LossKind::categorical_ce));
  CHECK(!compatible(Activation::identity, LossKind::categorical_ce));
}

TEST_CASE("registry templates bind to data shapes") {
  const auto logistic = resolve_architecture({"linear_model", "LogisticRegression"}, {150, 4, 3});
  REQUIRE(logistic.layers().size() == 1);
  CHECK(logistic.layers()[0].inputs == 4);
  CHECK(logistic.layers()[0].outputs == 3);
  CHECK(logistic.activation() == Activation::softmax);
  CHECK(logistic.loss() == LossKind::categorical_ce);

  PrimalModel ridge(Family::ridge, {{"alpha", 2.5}});
  const auto rdesc = resolve_architecture(ridge.registry_key(), {10, 3, 0}, proxy_overrides_from(ridge));
  CHECK(rdesc.regularizer().kind == Regularizer::Kind::l2);
  CHECK(rdesc.regularizer().alpha == 2.5);
  CHECK(rdesc.output_width() == 1);

  const auto svc = resolve_architecture({"svm", "LinearSVC"}, {10, 4, 3});
  CHECK(svc.activation() == Activation::identity);
  CHECK(svc.loss() == LossKind::categorical_hinge);

  const auto tree = resolve_architecture({"tree", "DecisionTreeClassifier"}, {150, 4, 3});
  CHECK(tree.layers()[0].kind == LayerKind::soft_binning);
  CHECK(tree.layers()[0].outputs == 16);

  CHECK_THROWS_AS(resolve_architecture({"nonexistent", "X"}, {1, 1, 0}), LookupError);
}

TEST_CASE("with_params rebuilds architecture settings") {
  const auto tree = resolve_architecture({"tree", "DecisionTreeClassifier"}, {150, 2, 3});
  const auto wider = with_params(tree, {{"cut_points", 2.0}, {"temperature", 0.05}});
  CHECK(wider.layers()[0].outputs == 9);
  CHECK(wider.layers()[0].temperature == 0.05);
  CHECK_THROWS_AS(with_params(tree, {{"hidden_units", 4.0}}), ConfigError);
  const auto mlp = universal_proxy({0, 4, 3}, {8});
  CHECK(with_params(mlp, {{"hidden_layers", 2.0}}).layers().size() == 3);
}

TEST_CASE("universal proxy shapes") {
  const auto flat = universal_proxy({0, 4, 3}, {});
  REQUIRE(flat.layers().size() == 1);
  CHECK(flat.layers()[0].inputs == 4);
  const auto mlp = universal_proxy({0, 4, 3}, {8});
  REQUIRE(mlp.layers().size() == 2);
  CHECK(mlp.layers()[1].inputs == 8);
  CHECK(mlp.layers()[1].outputs == 3);
  CHECK(mlp.activation() == Activation::softmax);
}

TEST_CASE("exact transfer reproduces GLM predictions") {
  Rng rng(4);
  Matrix X(30, 3);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 3; ++j) X(i, j) = rng.uniform(-1, 1);
    y[i] = 2 * X(i, 0) - X(i, 2) + 0.1 * rng.uniform();
  }
  const auto lin = fit_linear_family(X, y, {Penalty::Kind::none});
  const auto desc = resolve_architecture(lin.registry_key(), {30, 3, 0});
  const auto w = transfer_exact(lin, desc);
  const auto out = proxy_forward(desc, w, X);
  const auto ref = lin.predict(X);
  for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(out(i, 0) - ref[i]) <= 1e-12);

  std::vector<double> labels(30);
  for (std::size_t i = 0; i < 30; ++i) labels[i] = X(i, 0) + 0.3 * X(i, 1) > 0 ? 1 : 0;
  const auto logit = fit_logistic(X, labels);
  const auto ldesc = resolve_architecture(logit.registry_key(), {30, 3, 2});
  const auto probs = proxy_forward(ldesc, transfer_exact(logit, ldesc), X);
  const auto ref_p = logit.predict_proba(X);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(probs(i, k) - ref_p(i, k)) <= 1e-9);

  const auto tree = fit_cart(X, labels);
  CHECK_THROWS_AS(transfer_exact(tree, resolve_architecture(tree.registry_key(), {30, 3, 2})),
                  UnsupportedMapError);
}

TEST_CASE("multiclass logistic transfer keeps every argmax") {
  const auto iris = builtin("iris");
  Scaler s;
  const auto X = s.fit_transform(iris.X);
  const auto m = fit_logistic(X, iris.y);
  const auto desc = resolve_architecture(m.registry_key(), {150, 4, 3});
  const auto out = proxy_forward(desc, transfer_exact(m, desc), X);
  CHECK(argmax_rows(out) == m.predict(X));
}

TEST_CASE("soft binning oracles") {
  const std::vector<double> cut{0.0};
  const auto left = soft_bins(-1.0, cut, 1e-3);
  CHECK(left[0] == doctest::Approx(1.0));
  CHECK(left[1] == doctest::Approx(0.0));

  const std::vector<std::vector<double>> onehots{{0, 1}, {1, 0, 0}};
  const auto leaves = kron_leaves(onehots);
  REQUIRE(leaves.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(leaves[i] == (i == 3 ? 1.0 : 0.0));
}

TEST_CASE("soft binning reaches hard binning as temperature vanishes") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> cuts(1 + rng.below(3));
    for (auto& c : cuts) c = rng.uniform(-0.9, 0.9);
    std::sort(cuts.begin(), cuts.end());
    for (int i = 0; i < 1000; ++i) {
      const double x = -1.0 + 2.0 * i / 999.0;
      bool near = false;
      for (double c : cuts) near = near || std::abs(x - c) <= 0.01;
      if (near) continue;
      const auto bins = soft_bins(x, cuts, 1e-3);
      const auto arg = static_cast<std::size_t>(std::max_element(bins.begin(), bins.end()) - bins.begin());
      CHECK(arg == oracle::hard_bin(x, cuts));
    }
  }
}

TEST_CASE("dndt probabilities sum to one") {
  const auto desc = resolve_architecture({"tree", "DecisionTreeClassifier"}, {10, 2, 3});
  Rng rng(3);
  const auto w = init_weights(desc, rng);
  const auto [X, Y] = oracle::random_batch(desc, 20, rng);
  const auto p = proxy_forward(desc, w, X);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0;
    for (double v : p.row_span(r)) s += v;
    CHECK(s == doctest::Approx(1.0));
  }
  const auto spec = dndt_spec_from(desc, w);
  CHECK(spec.leaf_count() == 4);
  CHECK(max_abs_diff(dndt_forward(spec, X), p) <= 1e-12);
}

TEST_CASE("universal MLP learns XOR") {
  const Matrix X{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const auto Y = encode_targets({0, 1, 1, 0}, Task::classification, 2);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.01;
  const auto trained = train_proxy(universal_proxy({4, 2, 2}, {8}), X, Y, cfg);
  CHECK(decode_outputs(trained.forward(X), true) == std::vector<double>{0, 1, 1, 0});
}

TEST_CASE("distillation uses the primal's outputs as targets") {
  Rng rng(6);
  Matrix X(40, 2);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    X(i, 0) = rng.uniform(-1, 1);
    X(i, 1) = rng.uniform(-1, 1);
    y[i] = X(i, 0) + rng.uniform(-0.5, 0.5);
  }
  const auto ridge = fit_linear_family(X, y, {Penalty::Kind::l2, 5.0});
  const auto t = distillation_targets(ridge, X);
  const auto yhat = ridge.predict(X);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(t(i, 0) == yhat[i]);
    CHECK(t(i, 0) != y[i]);
  }
}

TEST_CASE("distilling a constant predictor yields that constant") {
  Matrix X(20, 1);
  for (std::size_t i = 0; i < 20; ++i) X(i, 0) = static_cast<double>(i);
  const auto flat = fit_linear_family(X, std::vector<double>(20, 3.0), {Penalty::Kind::none});
  const auto desc = with_strategy(resolve_architecture(flat.registry_key(), {20, 1, 0}), MappingStrategy::approximate);
  TrainConfig cfg;
  cfg.epochs = 50;
  const auto proxy = distill(flat, desc, X, cfg);
  for (double v : decode_outputs(proxy.forward(X), false)) CHECK(v == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
