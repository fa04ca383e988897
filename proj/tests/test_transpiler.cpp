#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "doppel/data.hpp"
#include "doppel/errors.hpp"
#include "doppel/native_format.hpp"
#include "doppel/onnx.hpp"
#include "doppel/transpiler.hpp"
#include "oracles.hpp"

using namespace doppel;

namespace {
struct Prepared {
  Split split;
  Dataset ds;
};

Prepared prepared(const char* name) {
  auto ds = builtin(name);
  Scaler s;
  auto split = train_test_split(s.fit_transform(ds.X), ds.y, 0.6, 0);
  return {std::move(split), std::move(ds)};
}

TrainConfig quick(std::size_t epochs = 40) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.learning_rate = 0.01;
  return cfg;
}

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / ("doppel_test_" + stem)).string();
}
}  // namespace

TEST_CASE("registry register, lookup and versions") {
  Registry reg;
  const auto base = Registry::with_builtins().lookup({"linear_model", "Ridge"});
  reg.register_entry(base);
  CHECK(reg.lookup(base.key) == base);
  CHECK(reg.lookup(base.key, std::string("default")) == reg.lookup(base.key));
  CHECK_THROWS_AS(reg.register_entry(base), ConflictError);

  auto v2 = base;
  v2.version = "v2";
  reg.register_entry(v2);
  CHECK(reg.size() == 2);
  CHECK(reg.lookup(base.key, std::string("v2")).version == "v2");
  CHECK(reg.contains(base.key, "v2"));
  CHECK_THROWS_AS(reg.lookup({"nonexistent", "X"}), LookupError);

  const auto builtins = Registry::with_builtins();
  CHECK(builtins.size() == 7);
  const auto lr = builtins.lookup({"linear_model", "LinearRegression"});
  CHECK(lr.adapter_kind == AdapterKind::regressor);
  CHECK(lr.proxy.shape == ArchitectureTemplate::Shape::glm);
}

TEST_CASE("dope defaults and strategy rules") {
  const auto p = prepared("iris");
  const auto deferred = dope(PrimalModel(Family::logistic));
  CHECK(!deferred.fitted());
  CHECK(deferred.strategy() == MappingStrategy::approximate);

  PrimalModel tree(Family::decision_tree);
  tree.fit(p.split.X_train, p.split.y_train);
  DopeOptions exact;
  exact.strategy = MappingStrategy::exact;
  CHECK_THROWS_AS(dope(tree, exact), UnsupportedMapError);
  CHECK_THROWS_AS(deferred.predict(p.split.X_test), StateError);
  CHECK_THROWS_AS(deferred.save(temp_path("unfitted")), StateError);
}

TEST_CASE("fitted linear regression is mapped immediately") {
  const auto p = prepared("diabetes");
  PrimalModel lin(Family::linear);
  lin.fit(p.split.X_train, p.split.y_train);
  const auto doped = dope(lin);
  REQUIRE(doped.fitted());
  CHECK(doped.strategy() == MappingStrategy::exact);
  CHECK(doped.configs_evaluated() == 0);
  const auto a = doped.predict(p.split.X_test);
  const auto b = lin.predict(p.split.X_test);
  CHECK(a.size() == p.split.X_test.rows());
  CHECK(oracle::max_abs(a, b) <= 1e-6);
}

TEST_CASE("exact map rejects search parameters") {
  const auto p = prepared("diabetes");
  PrimalModel ridge(Family::ridge);
  ridge.fit(p.split.X_train, p.split.y_train);
  DopeOptions opts;
  opts.params = parse_search_space(R"({"optimizer": {"grid_search": ["adam", "nadam"]}})");
  CHECK_THROWS_AS(dope(ridge, opts), ConfigError);
}

TEST_CASE("grid search over optimizers evaluates two configurations") {
  const auto p = prepared("iris");
  DopeOptions opts;
  opts.train = quick();
  auto doped = dope(PrimalModel(Family::logistic), opts);
  doped.fit(p.split.X_train, p.split.y_train,
            parse_search_space(R"({"optimizer": {"grid_search": ["adam", "nadam"]}})"));
  CHECK(doped.configs_evaluated() == 2);
  REQUIRE(doped.search_result());
  CHECK(doped.search_result()->trials.size() == 2);

  auto single = dope(PrimalModel(Family::logistic), opts);
  single.fit(p.split.X_train, p.split.y_train);
  CHECK(single.configs_evaluated() == 1);
}

TEST_CASE("doped fit is deterministic for a seed") {
  const auto p = prepared("iris");
  DopeOptions opts;
  opts.train = quick(30);
  opts.train.seed = 7;
  const auto space = parse_search_space(R"({"learning_rate": {"grid_search": [0.01, 0.05]}})");
  auto a = dope(PrimalModel(Family::decision_tree), opts);
  auto b = dope(PrimalModel(Family::decision_tree), opts);
  a.fit(p.split.X_train, p.split.y_train, space);
  b.fit(p.split.X_train, p.split.y_train, space);
  CHECK(*a.search_result() == *b.search_result());
  CHECK(a.proxy().weights == b.proxy().weights);
}

TEST_CASE("score returns loss then metric") {
  const auto p = prepared("iris");
  PrimalModel lr(Family::logistic);
  lr.fit(p.split.X_train, p.split.y_train);
  const auto doped = dope(lr);
  const auto s = doped.score(p.split.X_test, p.split.y_test);
  CHECK(s.size() == 2);
  CHECK(s[0] >= 0.0);
  CHECK(std::abs(s[1] - 0.84) <= 0.08);

  // Perfect predictions on the model's own labels.
  const auto own = doped.predict(p.split.X_test);
  CHECK(doped.score(p.split.X_test, own)[1] == 1.0);
}

TEST_CASE("ties in class scores resolve to the lowest index") {
  CHECK(decode_outputs(Matrix{{0.4, 0.4, 0.2}}, true) == std::vector<double>{0});
}

TEST_CASE("universal and approximate fits produce usable models") {
  const auto p = prepared("iris");
  DopeOptions opts;
  opts.train = quick(60);
  opts.strategy = MappingStrategy::universal;
  auto uni = dope(PrimalModel(Family::logistic), opts);
  uni.fit(p.split.X_train, p.split.y_train);
  CHECK(uni.score(p.split.X_test, p.split.y_test)[1] > 0.7);

  opts.strategy = MappingStrategy::approximate;
  auto approx = dope(PrimalModel(Family::linear_svc), opts);
  approx.fit(p.split.X_train, p.split.y_train);
  CHECK(approx.teacher_targets().rows() == p.split.X_train.rows());
  CHECK(approx.score(p.split.X_test, p.split.y_test)[1] > 0.7);
  CHECK_THROWS_AS(approx.fit(p.split.X_train, std::vector<double>(p.split.X_train.rows(), 1.0)),
                  InputError);
}

TEST_CASE("save writes ONNX and native JSON that round trip") {
  const auto p = prepared("iris");
  DopeOptions opts;
  opts.train = quick();
  auto doped = dope(PrimalModel(Family::decision_tree), opts);
  doped.fit(p.split.X_train, p.split.y_train);
  const auto stem = temp_path("save");
  doped.save(stem);

  const auto graph = parse_model(read_text_file(stem + ".onnx"));
  validate_graph(graph);
  const auto loaded = DopedModel::from_native(load_native(stem + ".json"));
  CHECK(max_abs_diff(loaded.decision_scores(p.split.X_test), doped.decision_scores(p.split.X_test)) <= 1e-12);
  CHECK(loaded.strategy() == doped.strategy());
  std::filesystem::remove(stem + ".onnx");
  std::filesystem::remove(stem + ".json");
}
