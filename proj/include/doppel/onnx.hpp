#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doppel/matrix.hpp"
#include "doppel/network.hpp"

namespace doppel {

inline constexpr std::int64_t kOnnxIrVersion = 8;
inline constexpr std::int64_t kOnnxOpset = 13;

enum class TensorType : std::int32_t { float32 = 1, int64 = 7 };

/// Initializer: dims plus little-endian raw bytes.
struct OnnxTensor {
  std::string name;
  TensorType data_type = TensorType::float32;
  std::vector<std::int64_t> dims;
  std::string raw_data;

  static OnnxTensor from_floats(std::string name, std::vector<std::int64_t> dims, std::span<const float> values);
  static OnnxTensor from_int64s(std::string name, std::vector<std::int64_t> dims,
                                std::span<const std::int64_t> values);
  std::vector<float> floats() const;
  std::vector<std::int64_t> int64s() const;
  std::size_t element_count() const;

  friend bool operator==(const OnnxTensor&, const OnnxTensor&) = default;
};

struct OnnxAttribute {
  enum class Type : std::int32_t { float_ = 1, int_ = 2, string = 3, floats = 6, ints = 7 };

  std::string name;
  Type type = Type::int_;
  float f = 0.0F;
  std::int64_t i = 0;
  std::string s;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;

  static OnnxAttribute of_int(std::string name, std::int64_t v);
  static OnnxAttribute of_float(std::string name, float v);

  friend bool operator==(const OnnxAttribute&, const OnnxAttribute&) = default;
};

struct OnnxNode {
  std::string op_type;
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<OnnxAttribute> attributes;
  std::string domain;

  const OnnxAttribute* attribute(std::string_view name) const;
  friend bool operator==(const OnnxNode&, const OnnxNode&) = default;
};

/// A dimension is either fixed (dim_param empty) or symbolic.
struct OnnxDim {
  std::int64_t value = 0;
  std::string param;

  friend bool operator==(const OnnxDim&, const OnnxDim&) = default;
};

struct OnnxValueInfo {
  std::string name;
  TensorType elem_type = TensorType::float32;
  std::vector<OnnxDim> dims;

  friend bool operator==(const OnnxValueInfo&, const OnnxValueInfo&) = default;
};

struct OnnxGraph {
  std::int64_t ir_version = kOnnxIrVersion;
  std::string opset_domain;
  std::int64_t opset_version = kOnnxOpset;
  std::string producer_name = "doppel";
  std::string name;
  std::vector<OnnxNode> nodes;
  std::vector<OnnxTensor> initializers;
  std::vector<OnnxValueInfo> inputs;
  std::vector<OnnxValueInfo> outputs;

  friend bool operator==(const OnnxGraph&, const OnnxGraph&) = default;
};

/// Supported operators: Gemm, Sigmoid, Softmax, Relu, Mul, Reshape.
bool onnx_op_supported(std::string_view op_type) noexcept;

/// Checks topological order, that every input is defined, that exactly one
/// output exists and that only supported operators appear. Throws ExportError.
void validate_graph(const OnnxGraph& g);

/// Dense layers become Gemm (transB = 1, weights [out × in]) followed by the
/// activation node. A soft-binning layer becomes one Gemm + Softmax per
/// feature and an outer-product chain of Reshape and Mul nodes.
OnnxGraph build_graph(const ProxyDescriptor& desc, std::span<const ParamBlock> weights);

/// Prepends x ↦ (x − mean) / std as a diagonal Gemm so the graph consumes
/// unscaled features.
OnnxGraph with_standardization(const OnnxGraph& g, std::span<const double> means, std::span<const double> stds);

std::string serialize(const OnnxGraph& g);
/// Throws ParseError (with byte offset) on truncated or malformed input.
OnnxGraph parse_model(std::string_view bytes);

/// Reference evaluator in float32. Throws EvaluationError naming the node
/// on shape mismatches.
Matrix interpret(const OnnxGraph& g, const Matrix& x);

/// Operator counts, e.g. {"Gemm": 3, "Softmax": 3, ...}.
std::map<std::string, std::size_t> op_histogram(const OnnxGraph& g);

}  // namespace doppel
