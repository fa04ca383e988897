#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doppel/data.hpp"
#include "doppel/errors.hpp"

using namespace doppel;

TEST_CASE("parse_csv numeric and string labels") {
  const auto ds = parse_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n", "y", Task::regression);
  CHECK(ds.rows() == 3);
  CHECK(ds.features() == 2);
  CHECK(ds.y == std::vector<double>{3, 6, 9});
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});

  const auto cls = parse_csv("x,label\n0,a\n1,b\n2,a\n", "label", Task::classification);
  CHECK(cls.y == std::vector<double>{0, 1, 0});
  CHECK(cls.class_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("parse_csv errors name the problem") {
  try {
    parse_csv("a,y\n1,2\n3\n", "y", Task::regression);
    FAIL("ragged row accepted");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("row") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("a,y\n1,2\n", "z", Task::regression), InputError);
  CHECK_THROWS_AS(parse_csv("a,y\nfoo,2\n", "y", Task::regression), InputError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", "y", Task::regression), Error);
}

TEST_CASE("builtin datasets") {
  const auto iris = builtin("iris");
  CHECK(iris.rows() == 150);
  CHECK(iris.features() == 4);
  CHECK(iris.task == Task::classification);
  CHECK(iris.num_classes() == 3);
  for (double v : iris.y) CHECK((v == 0 || v == 1 || v == 2));

  const auto diabetes = builtin("diabetes");
  CHECK(diabetes.rows() == 442);
  CHECK(diabetes.features() == 10);
  CHECK(diabetes.task == Task::regression);
  CHECK_THROWS_AS(builtin("mnist"), LookupError);
}

TEST_CASE("scaler oracles") {
  Scaler s;
  const auto z = s.fit_transform(Matrix{{0, 5}, {2, 5}});
  CHECK(z(0, 0) == doctest::Approx(-1));
  CHECK(z(1, 0) == doctest::Approx(1));
  CHECK(z(0, 1) == 0.0);
  CHECK(z(1, 1) == 0.0);
  CHECK(s.transform(Matrix{{0, 5}, {2, 5}}) == z);
  CHECK_THROWS_AS(Scaler().transform(Matrix{{1}}), StateError);
  CHECK_THROWS_AS(s.transform(Matrix{{1, 2, 3}}), DimensionError);

  const auto restored = Scaler::from_stats(s.means(), s.stds());
  CHECK(restored.transform(Matrix{{1, 1}}) == s.transform(Matrix{{1, 1}}));
}

TEST_CASE("scaled iris columns have zero mean and unit std") {
  const auto iris = builtin("iris");
  Scaler s;
  const auto z = s.fit_transform(iris.X);
  for (std::size_t c = 0; c < z.cols(); ++c) {
    const auto col = z.column_copy(c);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    double var = 0;
    for (double v : col) var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(std::sqrt(var / col.size()) - 1.0) <= 1e-10);
  }
}

TEST_CASE("train_test_split contracts") {
  const auto iris = builtin("iris");
  const auto a = train_test_split(iris.X, iris.y, 0.6, 0);
  CHECK(a.X_test.rows() == 90);
  CHECK(a.X_train.rows() == 60);
  const auto b = train_test_split(iris.X, iris.y, 0.6, 0);
  CHECK(a.test_rows == b.test_rows);
  CHECK(a.X_train == b.X_train);

  std::vector<std::size_t> all = a.train_rows;
  all.insert(all.end(), a.test_rows.begin(), a.test_rows.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  for (std::size_t i = 0; i < a.test_rows.size(); ++i)
    CHECK(a.y_test[i] == iris.y[a.test_rows[i]]);

  CHECK_THROWS_AS(train_test_split(iris.X, iris.y, 1.0, 0), InputError);
  CHECK_THROWS_AS(train_test_split(iris.X, iris.y, 0.0, 0), InputError);
}
