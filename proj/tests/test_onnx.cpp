#include <doctest.h>

#include <cmath>

#include "doppel/architectures.hpp"
#include "doppel/errors.hpp"
#include "doppel/onnx.hpp"
#include "doppel/protowire.hpp"
#include "oracles.hpp"

using namespace doppel;

namespace {
std::vector<ProxyDescriptor> shipped(std::size_t features = 4, std::size_t classes = 3) {
  std::vector<ProxyDescriptor> out;
  for (const auto& [module, model] :
       std::vector<std::pair<std::string, std::string>>{{"linear_model", "LinearRegression"},
                                                        {"linear_model", "Ridge"},
                                                        {"linear_model", "Lasso"},
                                                        {"linear_model", "ElasticNet"},
                                                        {"linear_model", "LogisticRegression"},
                                                        {"svm", "LinearSVC"},
                                                        {"tree", "DecisionTreeClassifier"}}) {
    const bool regression = model != "LogisticRegression" && model != "LinearSVC" &&
                            model != "DecisionTreeClassifier";
    out.push_back(resolve_architecture({module, model}, {10, features, regression ? 0 : classes}));
  }
  out.push_back(universal_proxy({10, features, classes}, {8}));
  out.push_back(universal_proxy({10, features, 0}, {8, 4}));
  return out;
}

OnnxGraph identity_graph() {
  OnnxGraph g;
  g.name = "identity";
  const std::vector<float> eye{1, 0, 0, 1}, zero{0, 0};
  g.initializers.push_back(OnnxTensor::from_floats("W", {2, 2}, eye));
  g.initializers.push_back(OnnxTensor::from_floats("B", {2}, zero));
  g.inputs.push_back({"input", TensorType::float32, {{0, "N"}, {2, ""}}});
  g.outputs.push_back({"output", TensorType::float32, {{0, "N"}, {2, ""}}});
  g.nodes.push_back({"Gemm", "gemm", {"input", "W", "B"}, {"output"}, {OnnxAttribute::of_int("transB", 1)}, ""});
  return g;
}
}  // namespace

TEST_CASE("varint encoding") {
  wire::Writer w;
  w.varint(1);
  w.varint(300);
  w.varint(0);
  CHECK(w.bytes() == std::string("\x01\xAC\x02\x00", 4));
  wire::Reader r(w.bytes());
  CHECK(r.varint() == 1);
  CHECK(r.varint() == 300);
  CHECK(r.varint() == 0);
  CHECK(r.done());

  wire::Writer neg;
  neg.int_field(1, -1);
  CHECK(neg.bytes().size() == 11);
  wire::Reader nr(neg.bytes());
  nr.tag();
  CHECK(static_cast<std::int64_t>(nr.varint()) == -1);
}

TEST_CASE("reader reports the failing offset") {
  const std::string truncated("\x0A\x05\x01\x02", 4);
  wire::Reader r(truncated);
  r.tag();
  try {
    r.length_delimited();
    FAIL("truncated field accepted");
  } catch (const ParseError& e) {
    CHECK(e.offset() >= 1);
  }
  const std::string zero_bytes("\x00", 1);
  wire::Reader zero(zero_bytes);
  CHECK_THROWS_AS(zero.tag(), ParseError);
  const std::string long_bytes(11, '\xFF');
  wire::Reader overlong(long_bytes);
  CHECK_THROWS_AS(overlong.varint(), ParseError);
}

TEST_CASE("float tensors store little-endian IEEE bytes") {
  const std::vector<float> one{1.0F};
  CHECK(OnnxTensor::from_floats("t", {1}, one).raw_data == std::string("\x00\x00\x80\x3F", 4));
  CHECK(wire::bits_float(wire::float_bits(-2.5F)) == -2.5F);
}

TEST_CASE("construction rules for GLM graphs") {
  Rng rng(0);
  const auto logistic = resolve_architecture({"linear_model", "LogisticRegression"}, {10, 4, 3});
  const auto g = build_graph(logistic, init_weights(logistic, rng));
  REQUIRE(g.nodes.size() == 2);
  CHECK(g.nodes[0].op_type == "Gemm");
  CHECK(g.nodes[1].op_type == "Softmax");
  CHECK(g.initializers.size() == 2);

  const auto linear = resolve_architecture({"linear_model", "LinearRegression"}, {10, 3, 0});
  const auto lg = build_graph(linear, init_weights(linear, rng));
  REQUIRE(lg.nodes.size() == 1);
  CHECK(lg.nodes[0].op_type == "Gemm");
}

TEST_CASE("two-feature tree graph operator counts") {
  Rng rng(0);
  const auto tree = resolve_architecture({"tree", "DecisionTreeClassifier"}, {10, 2, 3});
  const auto hist = op_histogram(build_graph(tree, init_weights(tree, rng)));
  CHECK(hist.at("Gemm") == 3);
  CHECK(hist.at("Softmax") == 3);
  CHECK(hist.at("Mul") == 1);
  CHECK(hist.at("Reshape") == 3);
}

TEST_CASE("every shipped architecture round trips and matches the forward pass") {
  Rng rng(1);
  for (const auto& desc : shipped()) {
    CAPTURE(desc.name());
    const auto w = init_weights(desc, rng);
    const auto g = build_graph(desc, w);
    validate_graph(g);
    const auto bytes = serialize(g);
    const auto parsed = parse_model(bytes);
    CHECK(parsed == g);
    CHECK(parsed.ir_version == 8);
    CHECK(parsed.opset_version == 13);
    CHECK(serialize(parsed) == bytes);

    Matrix X(100, desc.input_width());
    for (auto& v : X.values()) v = rng.uniform(-2, 2);
    CHECK(max_abs_diff(interpret(parsed, X), proxy_forward(desc, w, X)) <= 1e-5);
  }
}

TEST_CASE("truncated buffers raise parse errors") {
  Rng rng(2);
  const auto desc = resolve_architecture({"linear_model", "LogisticRegression"}, {10, 4, 3});
  const auto bytes = serialize(build_graph(desc, init_weights(desc, rng)));
  for (std::size_t cut : {std::size_t{1}, bytes.size() / 3, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(parse_model(std::string_view(bytes).substr(0, cut)), ParseError);
}

TEST_CASE("unknown fields are skipped by wire type") {
  auto g = identity_graph();
  wire::Writer extra;
  extra.uint_field(90, 7);
  extra.bytes_field(91, "ignored");
  extra.float_field(92, 1.5F);
  extra.tag(93, wire::WireType::fixed64);
  std::string bytes = serialize(g) + extra.bytes();
  bytes.append(8, '\0');
  CHECK(parse_model(bytes) == g);
}

TEST_CASE("interpreter semantics") {
  const auto g = identity_graph();
  const Matrix x{{1.5, -2}, {0, 3}};
  CHECK(max_abs_diff(interpret(g, x), x) == 0.0);
  CHECK_THROWS_AS(interpret(g, Matrix{{1, 2, 3}}), EvaluationError);

  Rng rng(3);
  const auto desc = resolve_architecture({"linear_model", "LogisticRegression"}, {10, 4, 3});
  Matrix X(20, 4);
  for (auto& v : X.values()) v = rng.uniform(-3, 3);
  const auto p = interpret(build_graph(desc, init_weights(desc, rng)), X);
  for (std::size_t r = 0; r < p.rows(); ++r) CHECK(p(r, 0) + p(r, 1) + p(r, 2) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("validation rejects malformed graphs") {
  auto g = identity_graph();
  g.nodes[0].op_type = "Conv";
  CHECK_THROWS_AS(validate_graph(g), ExportError);
  g = identity_graph();
  g.nodes[0].inputs[1] = "missing";
  CHECK_THROWS_AS(validate_graph(g), ExportError);
}

TEST_CASE("standardization prefix") {
  const auto g = identity_graph();
  const std::vector<double> means{1, -1}, stds{2, 0.5};
  const auto s = with_standardization(g, means, stds);
  validate_graph(s);
  const auto out = interpret(s, Matrix{{3, 0}});
  CHECK(out(0, 0) == doctest::Approx(1.0));
  CHECK(out(0, 1) == doctest::Approx(2.0));
}
