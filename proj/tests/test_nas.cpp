#include <doctest.h>

#include <algorithm>

#include "doppel/architectures.hpp"
#include "doppel/data.hpp"
#include "doppel/errors.hpp"
#include "doppel/nas.hpp"

using namespace doppel;

namespace {
struct Fixture {
  ProxyDescriptor desc;
  Matrix X;
  Matrix Y;
};

Fixture iris_fixture() {
  auto ds = builtin("iris");
  Scaler s;
  auto X = s.fit_transform(ds.X);
  return {resolve_architecture({"linear_model", "LogisticRegression"}, {150, 4, 3}), X,
          encode_targets(ds.y, Task::classification, 3)};
}

TrainConfig quick() {
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.learning_rate = 0.02;
  return cfg;
}
}  // namespace

TEST_CASE("expand_grid products") {
  CHECK(expand_grid(parse_search_space(R"({"optimizer": {"grid_search": ["adam", "nadam"]}})")).size() == 2);
  const auto empty = expand_grid(SearchSpace{});
  REQUIRE(empty.size() == 1);
  CHECK(empty[0].empty());

  const auto grid = expand_grid(parse_search_space(R"({"b": ["x", "y", "z"], "a": [1, 2]})"));
  REQUIRE(grid.size() == 6);
  std::vector<std::pair<double, std::string>> seen;
  for (const auto& cfg : grid) seen.emplace_back(as_number(cfg.at("a"), "a"), as_text(cfg.at("b"), "b"));
  CHECK(std::is_sorted(seen.begin(), seen.end()));
  CHECK(seen.front() == std::make_pair(1.0, std::string("x")));
  CHECK(seen.back() == std::make_pair(2.0, std::string("z")));
}

TEST_CASE("search space parsing and validation") {
  CHECK_THROWS_AS(parse_search_space("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_search_space(R"({"optimizer": {"grid_search": []}})"), ConfigError);
  const auto scalar = parse_search_space(R"({"epochs": 5})");
  CHECK(scalar.entries.at("epochs").size() == 1);

  const auto f = iris_fixture();
  CHECK_THROWS_AS(expand_grid(parse_search_space(R"({"depth": [1, 2]})"), f.desc), ConfigError);
  CHECK(expand_grid(parse_search_space(R"({"learning_rate": [0.1, 0.01]})"), f.desc).size() == 2);

  std::string big = R"({"a": [1,2,3,4,5,6,7,8,9], "b": [1,2,3,4,5,6,7,8,9]})";
  CHECK_THROWS_AS(expand_grid(parse_search_space(big)), ConfigError);
}

TEST_CASE("apply_config routes training and architecture settings") {
  const auto tree = resolve_architecture({"tree", "DecisionTreeClassifier"}, {150, 2, 3});
  const auto [desc, cfg] = apply_config(tree, TrainConfig{},
                                        {{"optimizer", std::string("nadam")}, {"cut_points", 2.0}, {"epochs", 9.0}});
  CHECK(cfg.optimizer == OptimizerKind::nadam);
  CHECK(cfg.epochs == 9);
  CHECK(desc.layers()[0].cuts_per_feature == 2);
}

TEST_CASE("validation split is stratified and seeded") {
  const auto f = iris_fixture();
  const auto a = validation_split(f.Y, true, 0.2, 3);
  const auto b = validation_split(f.Y, true, 0.2, 3);
  CHECK(a.validation == b.validation);
  CHECK(a.validation.size() == 30);
  std::vector<int> per_class(3, 0);
  for (auto r : a.validation)
    for (int k = 0; k < 3; ++k) per_class[k] += f.Y(r, k) == 1.0;
  CHECK(per_class == std::vector<int>{10, 10, 10});
  CHECK(a.train.size() + a.validation.size() == 150);
}

TEST_CASE("search is deterministic and keeps the best trial") {
  const auto f = iris_fixture();
  const auto space = parse_search_space(
      R"({"optimizer": {"grid_search": ["adam", "nadam"]}, "learning_rate": [0.001, 0.05]})");
  const auto a = search(f.desc, f.X, f.Y, space, quick(), 0);
  const auto b = search(f.desc, f.X, f.Y, space, quick(), 0);
  CHECK(a == b);
  REQUIRE(a.trials.size() == 4);
  for (const auto& t : a.trials) CHECK(a.best_val_metric >= t.val_metric);
  CHECK(a.trials[a.best_index].config == a.best_config);
  for (std::size_t i = 0; i < a.best_index; ++i) CHECK(a.trials[i].val_metric < a.best_val_metric);
}

TEST_CASE("single configuration is selected") {
  const auto f = iris_fixture();
  const auto r = search(f.desc, f.X, f.Y, parse_search_space(R"({"optimizer": ["nadam"]})"), quick(), 1);
  REQUIRE(r.trials.size() == 1);
  CHECK(r.best_index == 0);
  CHECK(as_text(r.best_config.at("optimizer"), "optimizer") == "nadam");
}

TEST_CASE("optimality holds over random spaces") {
  const auto f = iris_fixture();
  Rng rng(12);
  for (int i = 0; i < 3; ++i) {
    std::string lrs = std::to_string(rng.uniform(0.001, 0.1)) + ", " + std::to_string(rng.uniform(0.001, 0.1));
    const auto r = search(f.desc, f.X, f.Y, parse_search_space(R"({"learning_rate": [)" + lrs + "]}"), quick(), i);
    for (const auto& t : r.trials) CHECK(r.best_val_metric >= t.val_metric);
  }
}

TEST_CASE("all trials diverging is a search failure") {
  const auto f = iris_fixture();
  CHECK_THROWS_AS(search(f.desc, f.X, f.Y, parse_search_space(R"({"learning_rate": [1.7e308]})"), quick(), 0),
                  SearchFailure);
}
