#include <doctest.h>

#include <cmath>
#include <vector>

#include "doppel/errors.hpp"
#include "doppel/network.hpp"
#include "doppel/numcore.hpp"
#include "doppel/rng.hpp"

using namespace doppel;

TEST_CASE("dense_forward identity, sigmoid and softmax") {
  const Matrix x{{3, 4}};
  const std::vector<double> zero2{0, 0};
  CHECK(dense_forward(Matrix::identity(2), zero2, x, Activation::identity) == x);

  const std::vector<double> zero1{0};
  const auto s = dense_forward(Matrix{{0}}, zero1, Matrix{{5}}, Activation::sigmoid);
  CHECK(s(0, 0) == doctest::Approx(0.5));

  const std::vector<double> zero3{0, 0, 0};
  const auto p = dense_forward(Matrix::identity(3), zero3, Matrix{{1, 1, 1}}, Activation::softmax);
  for (std::size_t j = 0; j < 3; ++j) CHECK(p(0, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("dense_forward rejects mismatched shapes") {
  const std::vector<double> b{0, 0};
  CHECK_THROWS_AS(dense_forward(Matrix::identity(2), b, Matrix{{1, 2, 3}}, Activation::identity),
                  DimensionError);
}

TEST_CASE("softmax rows sum to one on large logits") {
  const auto p = apply_activation(Matrix{{1000, 999, -1000}, {-5, 0, 5}}, Activation::softmax);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double sum = 0;
    for (double v : p.row_span(r)) {
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("loss_eval oracles") {
  const Matrix y{{1}, {2}};
  CHECK(loss_eval(LossKind::mse, y, y) == 0.0);

  const Matrix onehot{{0, 1, 0}};
  CHECK(loss_eval(LossKind::categorical_ce, onehot, onehot) <= 1e-6);

  CHECK(loss_eval(LossKind::categorical_hinge, Matrix{{1, 0}}, Matrix{{0.6, 0.9}}) ==
        doctest::Approx(1.3));

  // Clipped: a zero probability at the target stays finite.
  const double ce = loss_eval(LossKind::categorical_ce, onehot, Matrix{{1, 0, 0}});
  CHECK(std::isfinite(ce));
  CHECK(ce == doctest::Approx(-std::log(kProbabilityClip)));
  CHECK_THROWS_AS(loss_eval(LossKind::mse, Matrix{{1}}, Matrix{{1, 2}}), DimensionError);
}

TEST_CASE("losses are nonnegative on random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix t(4, 3), p(4, 3);
    for (std::size_t r = 0; r < 4; ++r) {
      t(r, rng.below(3)) = 1.0;
      for (std::size_t c = 0; c < 3; ++c) p(r, c) = rng.uniform(-2, 2);
    }
    const auto prob = apply_activation(p, Activation::softmax);
    CHECK(loss_eval(LossKind::mse, t, p) >= 0.0);
    CHECK(loss_eval(LossKind::categorical_ce, t, prob) >= 0.0);
    CHECK(loss_eval(LossKind::categorical_hinge, t, p) >= 0.0);
  }
}

TEST_CASE("loss_gradient matches finite differences") {
  Rng rng(11);
  for (auto kind : {LossKind::mse, LossKind::binary_ce, LossKind::categorical_ce}) {
    Matrix t(3, 2), p(3, 2);
    for (std::size_t r = 0; r < 3; ++r) {
      t(r, rng.below(2)) = 1.0;
      for (std::size_t c = 0; c < 2; ++c) p(r, c) = rng.uniform(0.2, 0.8);
    }
    const auto g = loss_gradient(kind, t, p);
    const double h = 1e-6;
    for (std::size_t k = 0; k < p.size(); ++k) {
      Matrix up = p, down = p;
      up.values()[k] += h;
      down.values()[k] -= h;
      const double fd = (loss_eval(kind, t, up) - loss_eval(kind, t, down)) / (2 * h);
      CHECK(g.values()[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("optimizer: zero gradients leave parameters unchanged") {
  std::vector<ParamBlock> params{{"w", Matrix{{1, -2}}, true}};
  auto state = make_optimizer(OptimizerKind::adam, 1e-3, params);
  const std::vector<Matrix> grads{Matrix(1, 2)};
  for (int i = 0; i < 3; ++i) optimizer_step(state, params, grads);
  CHECK(params[0].value == Matrix{{1, -2}});
  CHECK(state.first_moment[0] == std::vector<double>{0, 0});
  CHECK(state.second_moment[0] == std::vector<double>{0, 0});
}

TEST_CASE("optimizer: first Adam step has magnitude near lr") {
  std::vector<ParamBlock> params{{"w", Matrix{{0.0}}, false}};
  auto state = make_optimizer(OptimizerKind::adam, 1e-3, params);
  const std::vector<Matrix> grads{Matrix{{10.0}}};
  optimizer_step(state, params, grads);
  const double delta = std::abs(params[0].value(0, 0));
  CHECK(delta >= 0.9e-3);
  CHECK(delta <= 1.0e-3 + 1e-12);
  CHECK(params[0].value(0, 0) < 0.0);
}

TEST_CASE("optimizer: first Nadam step follows the lookahead formula") {
  std::vector<ParamBlock> params{{"w", Matrix{{0.0}}, false}};
  auto state = make_optimizer(OptimizerKind::nadam, 1e-3, params);
  const std::vector<Matrix> grads{Matrix{{10.0}}};
  optimizer_step(state, params, grads);
  // m_hat = 0.9 * 1 / (1 - 0.81) + 0.1 * 10 / 0.1, v_hat = 100.
  const double expected = 1e-3 * (0.9 / 0.19 + 10.0) / (10.0 + 1e-7);
  CHECK(params[0].value(0, 0) == doctest::Approx(-expected).epsilon(1e-9));
}

TEST_CASE("optimizer: deterministic trajectories and non-finite rejection") {
  const auto run = [] {
    std::vector<ParamBlock> params{{"w", Matrix{{0.5, 0.25}}, false}};
    auto state = make_optimizer(OptimizerKind::nadam, 1e-2, params);
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
      const std::vector<Matrix> grads{Matrix{{rng.uniform(-1, 1), rng.uniform(-1, 1)}}};
      optimizer_step(state, params, grads);
    }
    return params[0].value;
  };
  CHECK(run() == run());

  std::vector<ParamBlock> params{{"layer0.weight", Matrix{{1.0}}, false}};
  auto state = make_optimizer(OptimizerKind::adam, 1e-3, params);
  const std::vector<Matrix> bad{Matrix{{std::nan("")}}};
  CHECK_THROWS_AS(optimizer_step(state, params, bad), NumericError);
  CHECK(params[0].value(0, 0) == 1.0);
  CHECK_THROWS_AS(make_optimizer(OptimizerKind::adam, 1e-3, params, 1.0), ConfigError);
}

TEST_CASE("glorot_init bounds and determinism") {
  Rng a(5), b(5), c(6);
  const auto wa = glorot_init(4, 3, a);
  const auto wb = glorot_init(4, 3, b);
  const auto wc = glorot_init(4, 3, c);
  CHECK(wa.rows() == 3);
  CHECK(wa.cols() == 4);
  CHECK(wa == wb);
  CHECK(!(wa == wc));
  const double bound = std::sqrt(6.0 / 7.0);
  for (double v : wa.values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("rng reproducibility and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
  auto p = Rng(3).permutation(10);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(p[i] == i);
}

TEST_CASE("solve_linear") {
  std::vector<double> x;
  REQUIRE(solve_linear(Matrix{{2, 1}, {1, 3}}, {3, 5}, x));
  CHECK(x[0] == doctest::Approx(0.8));
  CHECK(x[1] == doctest::Approx(1.4));
  CHECK(!solve_linear(Matrix{{1, 2}, {2, 4}}, {1, 2}, x));
}
