#include "doppel/onnx.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_map>

#include "doppel/errors.hpp"
#include "doppel/protowire.hpp"

namespace doppel {

using wire::Reader;
using wire::WireType;
using wire::Writer;

OnnxTensor OnnxTensor::from_floats(std::string name, std::vector<std::int64_t> dims, std::span<const float> values) {
  OnnxTensor t{std::move(name), TensorType::float32, std::move(dims), {}};
  t.raw_data.reserve(values.size() * 4);
  for (float v : values) wire::append_le32(t.raw_data, wire::float_bits(v));
  return t;
}

OnnxTensor OnnxTensor::from_int64s(std::string name, std::vector<std::int64_t> dims,
                                   std::span<const std::int64_t> values) {
  OnnxTensor t{std::move(name), TensorType::int64, std::move(dims), {}};
  t.raw_data.reserve(values.size() * 8);
  for (auto v : values) wire::append_le64(t.raw_data, static_cast<std::uint64_t>(v));
  return t;
}

std::size_t OnnxTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) {
    if (d < 0) throw ExportError("tensor '" + name + "' has a negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::vector<float> OnnxTensor::floats() const {
  if (data_type != TensorType::float32) throw EvaluationError("tensor '" + name + "' is not float32");
  std::vector<float> out(raw_data.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = wire::bits_float(wire::read_le32(raw_data.data() + 4 * i));
  return out;
}

std::vector<std::int64_t> OnnxTensor::int64s() const {
  if (data_type != TensorType::int64) throw EvaluationError("tensor '" + name + "' is not int64");
  std::vector<std::int64_t> out(raw_data.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::int64_t>(wire::read_le64(raw_data.data() + 8 * i));
  }
  return out;
}

OnnxAttribute OnnxAttribute::of_int(std::string name, std::int64_t v) {
  OnnxAttribute a;
  a.name = std::move(name);
  a.type = Type::int_;
  a.i = v;
  return a;
}

OnnxAttribute OnnxAttribute::of_float(std::string name, float v) {
  OnnxAttribute a;
  a.name = std::move(name);
  a.type = Type::float_;
  a.f = v;
  return a;
}

const OnnxAttribute* OnnxNode::attribute(std::string_view attr) const {
  for (const auto& a : attributes)
    if (a.name == attr) return &a;
  return nullptr;
}

bool onnx_op_supported(std::string_view op) noexcept {
  return op == "Gemm" || op == "Sigmoid" || op == "Softmax" || op == "Relu" || op == "Mul" || op == "Reshape";
}

void validate_graph(const OnnxGraph& g) {
  std::set<std::string> defined;
  for (const auto& in : g.inputs) defined.insert(in.name);
  for (const auto& t : g.initializers) {
    if (!defined.insert(t.name).second) throw ExportError("duplicate value name '" + t.name + "'");
    const std::size_t width = t.data_type == TensorType::float32 ? 4 : 8;
    if (t.raw_data.size() != t.element_count() * width) {
      throw ExportError("initializer '" + t.name + "' holds " + std::to_string(t.raw_data.size()) +
                        " bytes for dims of " + std::to_string(t.element_count()) + " elements");
    }
  }
  for (const auto& n : g.nodes) {
    if (!onnx_op_supported(n.op_type)) throw ExportError("unsupported operator '" + n.op_type + "' in node '" + n.name + "'");
    for (const auto& in : n.inputs) {
      if (!in.empty() && !defined.contains(in)) {
        throw ExportError("node '" + n.name + "' reads '" + in + "' before it is defined");
      }
    }
    for (const auto& out : n.outputs) {
      if (!defined.insert(out).second) throw ExportError("value '" + out + "' is defined twice");
    }
  }
  if (g.outputs.size() != 1) throw ExportError("graph must have exactly one output");
  if (!defined.contains(g.outputs.front().name)) {
    throw ExportError("graph output '" + g.outputs.front().name + "' is never produced");
  }
}

namespace {

std::vector<float> to_floats(const Matrix& m) {
  std::vector<float> out;
  out.reserve(m.values().size());
  for (double v : m.values()) out.push_back(static_cast<float>(v));
  return out;
}

const ParamBlock& find_block(std::span<const ParamBlock> weights, const std::string& name) {
  for (const auto& b : weights)
    if (b.name == name) return b;
  throw ExportError("missing weight block '" + name + "'");
}

struct GraphBuilder {
  OnnxGraph g;
  int counter = 0;

  std::string add_float(std::string name, std::vector<std::int64_t> dims, const std::vector<float>& values) {
    g.initializers.push_back(OnnxTensor::from_floats(name, std::move(dims), values));
    return name;
  }

  std::string shape_const(const std::vector<std::int64_t>& shape) {
    std::string name = "shape";
    for (auto d : shape) name += "_" + (d < 0 ? std::string("m") + std::to_string(-d) : std::to_string(d));
    for (const auto& t : g.initializers)
      if (t.name == name) return name;
    g.initializers.push_back(
        OnnxTensor::from_int64s(name, {static_cast<std::int64_t>(shape.size())}, shape));
    return name;
  }

  std::string node(std::string op, std::string name, std::vector<std::string> inputs,
                   std::vector<OnnxAttribute> attrs = {}) {
    std::string out = name + ".out";
    g.nodes.push_back(OnnxNode{std::move(op), std::move(name), std::move(inputs), {out}, std::move(attrs), ""});
    return out;
  }

  std::string gemm(const std::string& name, const std::string& x, const std::string& w, const std::string& b) {
    return node("Gemm", name, {x, w, b},
                {OnnxAttribute::of_float("alpha", 1.0F), OnnxAttribute::of_float("beta", 1.0F),
                 OnnxAttribute::of_int("transB", 1)});
  }

  std::string activation(Activation act, const std::string& name, const std::string& x) {
    switch (act) {
      case Activation::identity:
        return x;
      case Activation::sigmoid:
        return node("Sigmoid", name, {x});
      case Activation::relu:
        return node("Relu", name, {x});
      case Activation::softmax:
        return node("Softmax", name, {x}, {OnnxAttribute::of_int("axis", -1)});
    }
    throw ExportError("unknown activation in node '" + name + "'");
  }
};

}  // namespace

OnnxGraph build_graph(const ProxyDescriptor& desc, std::span<const ParamBlock> weights) {
  try {
    check_weights(desc, weights);
  } catch (const DimensionError& e) {
    throw ExportError(std::string("cannot export proxy: ") + e.what());
  }
  GraphBuilder b;
  b.g.name = desc.name();
  b.g.inputs.push_back(OnnxValueInfo{"input", TensorType::float32,
                                     {OnnxDim{0, "N"}, OnnxDim{static_cast<std::int64_t>(desc.input_width()), ""}}});
  std::string cur = "input";
  const auto& layers = desc.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    const std::string prefix = "layer" + std::to_string(i);
    const bool head = i + 1 == layers.size();
    if (layer.kind == LayerKind::dense) {
      const auto& W = find_block(weights, prefix + ".weight").value;
      const auto& bias = find_block(weights, prefix + ".bias").value;
      const auto w = b.add_float(prefix + ".weight", {static_cast<std::int64_t>(W.rows()), static_cast<std::int64_t>(W.cols())},
                                 to_floats(W));
      const auto bb = b.add_float(prefix + ".bias", {static_cast<std::int64_t>(bias.cols())}, to_floats(bias));
      cur = b.gemm(prefix + ".gemm", cur, w, bb);
      cur = b.activation(head ? desc.activation() : layer.activation, prefix + ".act", cur);
      continue;
    }
    if (layer.kind != LayerKind::soft_binning) throw ExportError("layer " + std::to_string(i) + " has no ONNX lowering");
    const auto& cuts = find_block(weights, prefix + ".cut_points").value;
    const std::size_t d = layer.inputs;
    const std::size_t c = layer.cuts_per_feature;
    const double tau = layer.temperature;
    std::string leaves;
    std::size_t leaf_width = 0;
    for (std::size_t f = 0; f < d; ++f) {
      std::vector<double> sorted(c);
      for (std::size_t j = 0; j < c; ++j) sorted[j] = cuts(f, j);
      std::sort(sorted.begin(), sorted.end());
      std::vector<float> wf((c + 1) * d, 0.0F);
      std::vector<float> bf(c + 1, 0.0F);
      double offset = 0.0;
      for (std::size_t j = 0; j <= c; ++j) {
        if (j > 0) offset -= sorted[j - 1];
        wf[j * d + f] = static_cast<float>(static_cast<double>(j + 1) / tau);
        bf[j] = static_cast<float>(offset / tau);
      }
      const std::string bin = prefix + ".bin" + std::to_string(f);
      const auto w = b.add_float(bin + ".weight", {static_cast<std::int64_t>(c + 1), static_cast<std::int64_t>(d)}, wf);
      const auto bb = b.add_float(bin + ".bias", {static_cast<std::int64_t>(c + 1)}, bf);
      auto probs = b.activation(Activation::softmax, bin + ".softmax", b.gemm(bin + ".gemm", cur, w, bb));
      if (f == 0) {
        leaves = probs;
        leaf_width = c + 1;
        continue;
      }
      const auto m = static_cast<std::int64_t>(leaf_width);
      const auto k = static_cast<std::int64_t>(c + 1);
      const std::string outer = prefix + ".outer" + std::to_string(f);
      auto col = b.node("Reshape", outer + ".lhs", {leaves, b.shape_const({-1, m, 1})});
      auto row = b.node("Reshape", outer + ".rhs", {probs, b.shape_const({-1, 1, k})});
      auto prod = b.node("Mul", outer + ".mul", {col, row});
      leaves = b.node("Reshape", outer + ".flat", {prod, b.shape_const({-1, m * k})});
      leaf_width *= c + 1;
    }
    cur = leaves;
  }
  b.g.nodes.back().outputs.front() = "output";
  b.g.outputs.push_back(OnnxValueInfo{
      "output", TensorType::float32, {OnnxDim{0, "N"}, OnnxDim{static_cast<std::int64_t>(desc.output_width()), ""}}});
  validate_graph(b.g);
  return b.g;
}

OnnxGraph with_standardization(const OnnxGraph& g, std::span<const double> means, std::span<const double> stds) {
  if (g.inputs.size() != 1 || g.inputs.front().dims.size() != 2) throw ExportError("standardization needs one 2-D input");
  const std::size_t d = means.size();
  if (stds.size() != d || static_cast<std::size_t>(g.inputs.front().dims[1].value) != d) {
    throw ExportError("standardization statistics do not match the graph input width");
  }
  const std::string& input = g.inputs.front().name;
  const std::string scaled = "preprocess.scaled";
  OnnxGraph out = g;
  for (auto& n : out.nodes)
    for (auto& in : n.inputs)
      if (in == input) in = scaled;
  std::vector<float> w(d * d, 0.0F);
  std::vector<float> b(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (!(stds[j] > 0.0)) throw ExportError("standardization std must be positive");
    w[j * d + j] = static_cast<float>(1.0 / stds[j]);
    b[j] = static_cast<float>(-means[j] / stds[j]);
  }
  const auto dd = static_cast<std::int64_t>(d);
  out.initializers.insert(out.initializers.begin(),
                          {OnnxTensor::from_floats("preprocess.weight", {dd, dd}, w),
                           OnnxTensor::from_floats("preprocess.bias", {dd}, b)});
  out.nodes.insert(out.nodes.begin(),
                   OnnxNode{"Gemm", "preprocess.gemm", {input, "preprocess.weight", "preprocess.bias"}, {scaled},
                            {OnnxAttribute::of_float("alpha", 1.0F), OnnxAttribute::of_float("beta", 1.0F),
                             OnnxAttribute::of_int("transB", 1)},
                            ""});
  validate_graph(out);
  return out;
}

namespace {

std::string encode_tensor(const OnnxTensor& t) {
  Writer w;
  for (auto d : t.dims) w.int_field(1, d);
  w.int_field(2, static_cast<std::int64_t>(t.data_type));
  w.bytes_field(8, t.name);
  w.bytes_field(9, t.raw_data);
  return w.take();
}

std::string encode_attribute(const OnnxAttribute& a) {
  Writer w;
  w.bytes_field(1, a.name);
  switch (a.type) {
    case OnnxAttribute::Type::float_:
      w.float_field(2, a.f);
      break;
    case OnnxAttribute::Type::int_:
      w.int_field(3, a.i);
      break;
    case OnnxAttribute::Type::string:
      w.bytes_field(4, a.s);
      break;
    case OnnxAttribute::Type::floats:
      for (float v : a.floats) w.float_field(7, v);
      break;
    case OnnxAttribute::Type::ints:
      for (auto v : a.ints) w.int_field(8, v);
      break;
  }
  w.int_field(20, static_cast<std::int64_t>(a.type));
  return w.take();
}

std::string encode_node(const OnnxNode& n) {
  Writer w;
  for (const auto& in : n.inputs) w.bytes_field(1, in);
  for (const auto& out : n.outputs) w.bytes_field(2, out);
  w.bytes_field(3, n.name);
  w.bytes_field(4, n.op_type);
  for (const auto& a : n.attributes) w.bytes_field(5, encode_attribute(a));
  if (!n.domain.empty()) w.bytes_field(7, n.domain);
  return w.take();
}

std::string encode_value_info(const OnnxValueInfo& v) {
  Writer shape;
  for (const auto& d : v.dims) {
    Writer dim;
    if (d.param.empty()) {
      dim.int_field(1, d.value);
    } else {
      dim.bytes_field(2, d.param);
    }
    shape.bytes_field(1, dim.bytes());
  }
  Writer tensor;
  tensor.int_field(1, static_cast<std::int64_t>(v.elem_type));
  tensor.bytes_field(2, shape.bytes());
  Writer type;
  type.bytes_field(1, tensor.bytes());
  Writer w;
  w.bytes_field(1, v.name);
  w.bytes_field(2, type.bytes());
  return w.take();
}

std::string encode_graph(const OnnxGraph& g) {
  Writer w;
  for (const auto& n : g.nodes) w.bytes_field(1, encode_node(n));
  w.bytes_field(2, g.name);
  for (const auto& t : g.initializers) w.bytes_field(5, encode_tensor(t));
  for (const auto& v : g.inputs) w.bytes_field(11, encode_value_info(v));
  for (const auto& v : g.outputs) w.bytes_field(12, encode_value_info(v));
  return w.take();
}

}  // namespace

std::string serialize(const OnnxGraph& g) {
  validate_graph(g);
  Writer opset;
  opset.bytes_field(1, g.opset_domain);
  opset.int_field(2, g.opset_version);
  Writer w;
  w.int_field(1, g.ir_version);
  w.bytes_field(2, g.producer_name);
  w.bytes_field(7, encode_graph(g));
  w.bytes_field(8, opset.bytes());
  return w.take();
}

namespace {

void expect(WireType got, WireType want, std::size_t at, const char* what) {
  if (got != want) throw ParseError(std::string("unexpected wire type for ") + what, at);
}

std::string read_string(Reader& r, WireType t, std::size_t at, const char* what) {
  expect(t, WireType::length_delimited, at, what);
  return std::string(r.length_delimited());
}

/// Repeated int64 fields arrive either one varint per tag or packed.
void read_int64s(Reader& r, WireType t, std::vector<std::int64_t>& out) {
  if (t == WireType::varint) {
    out.push_back(static_cast<std::int64_t>(r.varint()));
    return;
  }
  if (t != WireType::length_delimited) throw ParseError("unexpected wire type for repeated int64", r.offset());
  Reader packed = r.message();
  while (!packed.done()) out.push_back(static_cast<std::int64_t>(packed.varint()));
}

void read_floats(Reader& r, WireType t, std::vector<float>& out) {
  if (t == WireType::fixed32) {
    out.push_back(wire::bits_float(r.fixed32()));
    return;
  }
  if (t != WireType::length_delimited) throw ParseError("unexpected wire type for repeated float", r.offset());
  Reader packed = r.message();
  while (!packed.done()) out.push_back(wire::bits_float(packed.fixed32()));
}

OnnxTensor parse_tensor(Reader r) {
  OnnxTensor t;
  std::vector<float> float_data;
  std::vector<std::int64_t> int64_data;
  bool has_type = false;
  bool has_raw = false;
  const std::size_t start = r.offset();
  while (!r.done()) {
    const auto at = r.offset();
    const auto [field, type] = r.tag();
    switch (field) {
      case 1:
        read_int64s(r, type, t.dims);
        break;
      case 2: {
        expect(type, WireType::varint, at, "TensorProto.data_type");
        const auto dt = r.varint();
        if (dt != 1 && dt != 7) throw ParseError("unsupported tensor data type " + std::to_string(dt), at);
        t.data_type = static_cast<TensorType>(dt);
        has_type = true;
        break;
      }
      case 4:
        read_floats(r, type, float_data);
        break;
      case 7:
        read_int64s(r, type, int64_data);
        break;
      case 8:
        t.name = read_string(r, type, at, "TensorProto.name");
        break;
      case 9:
        t.raw_data = read_string(r, type, at, "TensorProto.raw_data");
        has_raw = true;
        break;
      default:
        r.skip(type);
    }
  }
  if (!has_type) throw ParseError("tensor without data_type", start);
  if (!has_raw) {
    if (t.data_type == TensorType::float32) {
      t = OnnxTensor::from_floats(t.name, t.dims, float_data);
    } else {
      t = OnnxTensor::from_int64s(t.name, t.dims, int64_data);
    }
  }
  return t;
}

OnnxAttribute parse_attribute(Reader r) {
  OnnxAttribute a;
  bool has_type = false;
  const std::size_t start = r.offset();
  while (!r.done()) {
    const auto at = r.offset();
    const auto [field, type] = r.tag();
    switch (field) {
      case 1:
        a.name = read_string(r, type, at, "AttributeProto.name");
        break;
      case 2:
        expect(type, WireType::fixed32, at, "AttributeProto.f");
        a.f = wire::bits_float(r.fixed32());
        break;
      case 3:
        expect(type, WireType::varint, at, "AttributeProto.i");
        a.i = static_cast<std::int64_t>(r.varint());
        break;
      case 4:
        a.s = read_string(r, type, at, "AttributeProto.s");
        break;
      case 7:
        read_floats(r, type, a.floats);
        break;
      case 8:
        read_int64s(r, type, a.ints);
        break;
      case 20: {
        expect(type, WireType::varint, at, "AttributeProto.type");
        const auto v = r.varint();
        if (v != 1 && v != 2 && v != 3 && v != 6 && v != 7) {
          throw ParseError("unsupported attribute type " + std::to_string(v), at);
        }
        a.type = static_cast<OnnxAttribute::Type>(v);
        has_type = true;
        break;
      }
      default:
        r.skip(type);
    }
  }
  if (!has_type) throw ParseError("attribute '" + a.name + "' without type", start);
  return a;
}

OnnxNode parse_node(Reader r) {
  OnnxNode n;
  const std::size_t start = r.offset();
  while (!r.done()) {
    const auto at = r.offset();
    const auto [field, type] = r.tag();
    switch (field) {
      case 1:
        n.inputs.push_back(read_string(r, type, at, "NodeProto.input"));
        break;
      case 2:
        n.outputs.push_back(read_string(r, type, at, "NodeProto.output"));
        break;
      case 3:
        n.name = read_string(r, type, at, "NodeProto.name");
        break;
      case 4:
        n.op_type = read_string(r, type, at, "NodeProto.op_type");
        break;
      case 5:
        expect(type, WireType::length_delimited, at, "NodeProto.attribute");
        n.attributes.push_back(parse_attribute(r.message()));
        break;
      case 7:
        n.domain = read_string(r, type, at, "NodeProto.domain");
        break;
      default:
        r.skip(type);
    }
  }
  if (n.op_type.empty()) throw ParseError("node without op_type", start);
  return n;
}

OnnxValueInfo parse_value_info(Reader r) {
  OnnxValueInfo v;
  const std::size_t start = r.offset();
  bool has_type = false;
  while (!r.done()) {
    const auto at = r.offset();
    const auto [field, type] = r.tag();
    if (field == 1) {
      v.name = read_string(r, type, at, "ValueInfoProto.name");
    } else if (field == 2) {
      expect(type, WireType::length_delimited, at, "ValueInfoProto.type");
      Reader tp = r.message();
      while (!tp.done()) {
        const auto at2 = tp.offset();
        const auto [f2, t2] = tp.tag();
        if (f2 != 1) {
          tp.skip(t2);
          continue;
        }
        expect(t2, WireType::length_delimited, at2, "TypeProto.tensor_type");
        Reader tt = tp.message();
        has_type = true;
        while (!tt.done()) {
          const auto at3 = tt.offset();
          const auto [f3, t3] = tt.tag();
          if (f3 == 1) {
            expect(t3, WireType::varint, at3, "TensorTypeProto.elem_type");
            const auto et = tt.varint();
            if (et != 1 && et != 7) throw ParseError("unsupported elem_type " + std::to_string(et), at3);
            v.elem_type = static_cast<TensorType>(et);
          } else if (f3 == 2) {
            expect(t3, WireType::length_delimited, at3, "TensorTypeProto.shape");
            Reader shape = tt.message();
            while (!shape.done()) {
              const auto at4 = shape.offset();
              const auto [f4, t4] = shape.tag();
              if (f4 != 1) {
                shape.skip(t4);
                continue;
              }
              expect(t4, WireType::length_delimited, at4, "TensorShapeProto.dim");
              Reader dim = shape.message();
              OnnxDim d;
              while (!dim.done()) {
                const auto at5 = dim.offset();
                const auto [f5, t5] = dim.tag();
                if (f5 == 1) {
                  expect(t5, WireType::varint, at5, "Dimension.dim_value");
                  d.value = static_cast<std::int64_t>(dim.varint());
                } else if (f5 == 2) {
                  d.param = read_string(dim, t5, at5, "Dimension.dim_param");
                } else {
                  dim.skip(t5);
                }
              }
              v.dims.push_back(std::move(d));
            }
          } else {
            tt.skip(t3);
          }
        }
      }
    } else {
      r.skip(type);
    }
  }
  if (v.name.empty()) throw ParseError("value info without a name", start);
  if (!has_type) throw ParseError("value '" + v.name + "' without a tensor type", start);
  return v;
}

void parse_graph(Reader r, OnnxGraph& g) {
  while (!r.done()) {
    const auto at = r.offset();
    const auto [field, type] = r.tag();
    switch (field) {
      case 1:
        expect(type, WireType::length_delimited, at, "GraphProto.node");
        g.nodes.push_back(parse_node(r.message()));
        break;
      case 2:
        g.name = read_string(r, type, at, "GraphProto.name");
        break;
      case 5:
        expect(type, WireType::length_delimited, at, "GraphProto.initializer");
        g.initializers.push_back(parse_tensor(r.message()));
        break;
      case 11:
        expect(type, WireType::length_delimited, at, "GraphProto.input");
        g.inputs.push_back(parse_value_info(r.message()));
        break;
      case 12:
        expect(type, WireType::length_delimited, at, "GraphProto.output");
        g.outputs.push_back(parse_value_info(r.message()));
        break;
      default:
        r.skip(type);
    }
  }
}

}  // namespace

OnnxGraph parse_model(std::string_view bytes) {
  OnnxGraph g;
  g.ir_version = 0;
  g.opset_version = 0;
  g.producer_name.clear();
  bool has_graph = false;
  bool has_opset = false;
  Reader r(bytes);
  while (!r.done()) {
    const auto at = r.offset();
    const auto [field, type] = r.tag();
    switch (field) {
      case 1:
        expect(type, WireType::varint, at, "ModelProto.ir_version");
        g.ir_version = static_cast<std::int64_t>(r.varint());
        break;
      case 2:
        g.producer_name = read_string(r, type, at, "ModelProto.producer_name");
        break;
      case 7:
        expect(type, WireType::length_delimited, at, "ModelProto.graph");
        if (has_graph) throw ParseError("model holds two graphs", at);
        parse_graph(r.message(), g);
        has_graph = true;
        break;
      case 8: {
        expect(type, WireType::length_delimited, at, "ModelProto.opset_import");
        Reader op = r.message();
        std::string domain;
        std::int64_t version = 0;
        while (!op.done()) {
          const auto at2 = op.offset();
          const auto [f2, t2] = op.tag();
          if (f2 == 1) {
            domain = read_string(op, t2, at2, "OperatorSetIdProto.domain");
          } else if (f2 == 2) {
            expect(t2, WireType::varint, at2, "OperatorSetIdProto.version");
            version = static_cast<std::int64_t>(op.varint());
          } else {
            op.skip(t2);
          }
        }
        if (domain.empty() || domain == "ai.onnx") {
          g.opset_domain = domain;
          g.opset_version = version;
          has_opset = true;
        }
        break;
      }
      default:
        r.skip(type);
    }
  }
  if (!has_graph) throw ParseError("model has no graph", bytes.size());
  if (!has_opset) throw ParseError("model has no default-domain opset_import", bytes.size());
  try {
    validate_graph(g);
  } catch (const ExportError& e) {
    throw ParseError(std::string("invalid graph: ") + e.what(), bytes.size());
  }
  return g;
}

namespace {

struct Value {
  std::vector<std::int64_t> dims;
  std::vector<float> f;
  std::vector<std::int64_t> i;
  bool is_int = false;

  std::size_t size() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
};

std::string dims_str(const std::vector<std::int64_t>& dims) {
  std::string s = "[";
  for (std::size_t k = 0; k < dims.size(); ++k) s += (k ? "," : "") + std::to_string(dims[k]);
  return s + "]";
}

[[noreturn]] void fail(const OnnxNode& n, const std::string& msg) {
  throw EvaluationError("node '" + n.name + "' (" + n.op_type + "): " + msg);
}

const Value& input_of(const std::unordered_map<std::string, Value>& values, const OnnxNode& n, std::size_t k) {
  if (k >= n.inputs.size() || n.inputs[k].empty()) fail(n, "missing input " + std::to_string(k));
  auto it = values.find(n.inputs[k]);
  if (it == values.end()) fail(n, "undefined input '" + n.inputs[k] + "'");
  if (it->second.is_int && n.op_type != "Reshape") fail(n, "input '" + n.inputs[k] + "' is not float");
  return it->second;
}

Value eval_gemm(const OnnxNode& n, const std::unordered_map<std::string, Value>& values) {
  const auto& A = input_of(values, n, 0);
  const auto& B = input_of(values, n, 1);
  const auto* ta = n.attribute("transA");
  const auto* tb = n.attribute("transB");
  const bool trans_a = ta && ta->i != 0;
  const bool trans_b = tb && tb->i != 0;
  const double alpha = n.attribute("alpha") ? n.attribute("alpha")->f : 1.0;
  const double beta = n.attribute("beta") ? n.attribute("beta")->f : 1.0;
  if (A.dims.size() != 2 || B.dims.size() != 2) fail(n, "Gemm needs 2-D operands, got " + dims_str(A.dims) + " and " + dims_str(B.dims));
  const auto M = static_cast<std::size_t>(trans_a ? A.dims[1] : A.dims[0]);
  const auto K = static_cast<std::size_t>(trans_a ? A.dims[0] : A.dims[1]);
  const auto Kb = static_cast<std::size_t>(trans_b ? B.dims[1] : B.dims[0]);
  const auto N = static_cast<std::size_t>(trans_b ? B.dims[0] : B.dims[1]);
  if (K != Kb) fail(n, "inner dimensions differ: " + dims_str(A.dims) + " vs " + dims_str(B.dims));
  const Value* C = n.inputs.size() > 2 && !n.inputs[2].empty() ? &input_of(values, n, 2) : nullptr;
  std::function<double(std::size_t, std::size_t)> c_at = [](std::size_t, std::size_t) { return 0.0; };
  if (C) {
    const auto& cd = C->dims;
    if (cd.empty() || (cd.size() == 1 && cd[0] == 1) || (cd.size() == 2 && cd[0] == 1 && cd[1] == 1)) {
      c_at = [C](std::size_t, std::size_t) { return static_cast<double>(C->f[0]); };
    } else if (cd.size() == 1 && static_cast<std::size_t>(cd[0]) == N) {
      c_at = [C](std::size_t, std::size_t j) { return static_cast<double>(C->f[j]); };
    } else if (cd.size() == 2 && static_cast<std::size_t>(cd[0]) == 1 && static_cast<std::size_t>(cd[1]) == N) {
      c_at = [C](std::size_t, std::size_t j) { return static_cast<double>(C->f[j]); };
    } else if (cd.size() == 2 && static_cast<std::size_t>(cd[0]) == M && static_cast<std::size_t>(cd[1]) == 1) {
      c_at = [C](std::size_t r, std::size_t) { return static_cast<double>(C->f[r]); };
    } else if (cd.size() == 2 && static_cast<std::size_t>(cd[0]) == M && static_cast<std::size_t>(cd[1]) == N) {
      c_at = [C, N](std::size_t r, std::size_t j) { return static_cast<double>(C->f[r * N + j]); };
    } else {
      fail(n, "bias " + dims_str(cd) + " does not broadcast to [" + std::to_string(M) + "," + std::to_string(N) + "]");
    }
  }
  Value out;
  out.dims = {static_cast<std::int64_t>(M), static_cast<std::int64_t>(N)};
  out.f.resize(M * N);
  const auto a_at = [&](std::size_t r, std::size_t k) {
    return static_cast<double>(trans_a ? A.f[k * M + r] : A.f[r * K + k]);
  };
  const auto b_at = [&](std::size_t k, std::size_t j) {
    return static_cast<double>(trans_b ? B.f[j * K + k] : B.f[k * N + j]);
  };
  for (std::size_t r = 0; r < M; ++r) {
    for (std::size_t j = 0; j < N; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += a_at(r, k) * b_at(k, j);
      out.f[r * N + j] = static_cast<float>(alpha * acc + beta * c_at(r, j));
    }
  }
  return out;
}

Value eval_softmax(const OnnxNode& n, const std::unordered_map<std::string, Value>& values) {
  const auto& X = input_of(values, n, 0);
  const auto rank = static_cast<std::int64_t>(X.dims.size());
  if (rank == 0) fail(n, "Softmax needs at least 1-D input");
  std::int64_t axis = n.attribute("axis") ? n.attribute("axis")->i : -1;
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) fail(n, "axis out of range for " + dims_str(X.dims));
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::int64_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(X.dims[static_cast<std::size_t>(k)]);
  for (std::int64_t k = axis + 1; k < rank; ++k) inner *= static_cast<std::size_t>(X.dims[static_cast<std::size_t>(k)]);
  const auto len = static_cast<std::size_t>(X.dims[static_cast<std::size_t>(axis)]);
  Value out = X;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const auto idx = [&](std::size_t a) { return (o * len + a) * inner + in; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < len; ++a) mx = std::max(mx, static_cast<double>(X.f[idx(a)]));
      double sum = 0.0;
      std::vector<double> e(len);
      for (std::size_t a = 0; a < len; ++a) {
        e[a] = std::exp(static_cast<double>(X.f[idx(a)]) - mx);
        sum += e[a];
      }
      for (std::size_t a = 0; a < len; ++a) out.f[idx(a)] = static_cast<float>(e[a] / sum);
    }
  }
  return out;
}

Value eval_mul(const OnnxNode& n, const std::unordered_map<std::string, Value>& values) {
  const auto& A = input_of(values, n, 0);
  const auto& B = input_of(values, n, 1);
  const std::size_t rank = std::max(A.dims.size(), B.dims.size());
  std::vector<std::int64_t> da(rank, 1), db(rank, 1), dout(rank);
  std::copy(A.dims.begin(), A.dims.end(), da.begin() + static_cast<std::ptrdiff_t>(rank - A.dims.size()));
  std::copy(B.dims.begin(), B.dims.end(), db.begin() + static_cast<std::ptrdiff_t>(rank - B.dims.size()));
  for (std::size_t k = 0; k < rank; ++k) {
    if (da[k] != db[k] && da[k] != 1 && db[k] != 1) {
      fail(n, "shapes " + dims_str(A.dims) + " and " + dims_str(B.dims) + " do not broadcast");
    }
    dout[k] = std::max(da[k], db[k]);
  }
  const auto strides = [rank](const std::vector<std::int64_t>& d) {
    std::vector<std::size_t> s(rank, 0);
    std::size_t acc = 1;
    for (std::size_t k = rank; k-- > 0;) {
      s[k] = d[k] == 1 ? 0 : acc;
      acc *= static_cast<std::size_t>(d[k]);
    }
    return s;
  };
  const auto sa = strides(da);
  const auto sb = strides(db);
  Value out;
  out.dims = dout;
  out.f.resize(out.size());
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < out.f.size(); ++flat) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k < rank; ++k) {
      ia += idx[k] * sa[k];
      ib += idx[k] * sb[k];
    }
    out.f[flat] = static_cast<float>(static_cast<double>(A.f[ia]) * static_cast<double>(B.f[ib]));
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < static_cast<std::size_t>(dout[k])) break;
      idx[k] = 0;
    }
  }
  return out;
}

Value eval_reshape(const OnnxNode& n, const std::unordered_map<std::string, Value>& values) {
  const auto& X = input_of(values, n, 0);
  const auto& S = input_of(values, n, 1);
  if (X.is_int) fail(n, "data input must be float");
  if (!S.is_int) fail(n, "shape input must be int64");
  std::vector<std::int64_t> dims = S.i;
  std::size_t known = 1;
  int infer = -1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (dims[k] == 0) {
      if (k >= X.dims.size()) fail(n, "shape copies a missing dimension");
      dims[k] = X.dims[k];
    }
    if (dims[k] == -1) {
      if (infer >= 0) fail(n, "shape has two -1 entries");
      infer = static_cast<int>(k);
    } else if (dims[k] < 0) {
      fail(n, "negative dimension in shape");
    } else {
      known *= static_cast<std::size_t>(dims[k]);
    }
  }
  const std::size_t total = X.size();
  if (infer >= 0) {
    if (known == 0 || total % known != 0) fail(n, "cannot reshape " + dims_str(X.dims) + " to " + dims_str(S.i));
    dims[static_cast<std::size_t>(infer)] = static_cast<std::int64_t>(total / known);
  } else if (known != total) {
    fail(n, "cannot reshape " + dims_str(X.dims) + " to " + dims_str(S.i));
  }
  Value out = X;
  out.dims = dims;
  return out;
}

}  // namespace

Matrix interpret(const OnnxGraph& g, const Matrix& x) {
  if (g.inputs.size() != 1) throw EvaluationError("interpreter expects exactly one graph input");
  if (g.outputs.size() != 1) throw EvaluationError("interpreter expects exactly one graph output");
  const auto& in = g.inputs.front();
  if (in.dims.size() != 2) throw EvaluationError("graph input '" + in.name + "' must be 2-D");
  if (in.dims[1].param.empty() && static_cast<std::size_t>(in.dims[1].value) != x.cols()) {
    throw EvaluationError("graph input '" + in.name + "' expects " + std::to_string(in.dims[1].value) +
                          " columns, got " + std::to_string(x.cols()));
  }
  if (in.dims[0].param.empty() && static_cast<std::size_t>(in.dims[0].value) != x.rows()) {
    throw EvaluationError("graph input '" + in.name + "' expects " + std::to_string(in.dims[0].value) + " rows");
  }
  std::unordered_map<std::string, Value> values;
  Value input;
  input.dims = {static_cast<std::int64_t>(x.rows()), static_cast<std::int64_t>(x.cols())};
  input.f.reserve(x.values().size());
  for (double v : x.values()) input.f.push_back(static_cast<float>(v));
  values[in.name] = std::move(input);
  for (const auto& t : g.initializers) {
    Value v;
    v.dims = t.dims;
    if (t.data_type == TensorType::int64) {
      v.is_int = true;
      v.i = t.int64s();
    } else {
      v.f = t.floats();
    }
    if ((v.is_int ? v.i.size() : v.f.size()) != v.size()) {
      throw EvaluationError("initializer '" + t.name + "' byte count does not match its dims");
    }
    values[t.name] = std::move(v);
  }
  for (const auto& n : g.nodes) {
    if (n.outputs.size() != 1) fail(n, "expected exactly one output");
    Value out;
    if (n.op_type == "Gemm") {
      out = eval_gemm(n, values);
    } else if (n.op_type == "Softmax") {
      out = eval_softmax(n, values);
    } else if (n.op_type == "Sigmoid" || n.op_type == "Relu") {
      out = input_of(values, n, 0);
      const bool sig = n.op_type == "Sigmoid";
      for (float& v : out.f) {
        v = sig ? static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v)))) : std::max(v, 0.0F);
      }
    } else if (n.op_type == "Mul") {
      out = eval_mul(n, values);
    } else if (n.op_type == "Reshape") {
      out = eval_reshape(n, values);
    } else {
      fail(n, "unsupported operator");
    }
    values[n.outputs.front()] = std::move(out);
  }
  auto it = values.find(g.outputs.front().name);
  if (it == values.end()) throw EvaluationError("graph output '" + g.outputs.front().name + "' was not computed");
  const auto& res = it->second;
  if (res.dims.size() != 2) throw EvaluationError("graph output must be 2-D, got " + dims_str(res.dims));
  Matrix out(static_cast<std::size_t>(res.dims[0]), static_cast<std::size_t>(res.dims[1]));
  for (std::size_t k = 0; k < res.f.size(); ++k) out.values()[k] = static_cast<double>(res.f[k]);
  return out;
}

std::map<std::string, std::size_t> op_histogram(const OnnxGraph& g) {
  std::map<std::string, std::size_t> h;
  for (const auto& n : g.nodes) ++h[n.op_type];
  return h;
}

}  // namespace doppel
