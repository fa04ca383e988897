#include "doppel/native_format.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doppel/errors.hpp"

namespace doppel {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

ojson param_json(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

ParamValue param_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw InputError("parameter value must be a number or string");
}

ojson matrix_json(const Matrix& m) {
  ojson rows = ojson::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const json& j, std::string_view what) {
  if (!j.is_array()) throw InputError(std::string(what) + " must be a nested list");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || row.size() != cols) throw InputError(std::string(what) + " is ragged");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row.at(c).is_number()) throw InputError(std::string(what) + " holds a non-number");
      m(r, c) = row.at(c).get<double>();
    }
  }
  return m;
}

std::string_view layer_kind_name(LayerKind k) { return k == LayerKind::dense ? "dense" : "soft_binning"; }

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "soft_binning") return LayerKind::soft_binning;
  throw InputError("unknown layer kind '" + s + "'");
}

ojson descriptor_ojson(const ProxyDescriptor& desc) {
  ojson layers = ojson::array();
  for (const auto& l : desc.layers()) {
    ojson lj;
    lj["kind"] = layer_kind_name(l.kind);
    lj["inputs"] = l.inputs;
    lj["outputs"] = l.outputs;
    lj["activation"] = to_string(l.activation);
    if (l.kind == LayerKind::soft_binning) {
      lj["cuts_per_feature"] = l.cuts_per_feature;
      lj["temperature"] = l.temperature;
    }
    layers.push_back(std::move(lj));
  }
  ojson searchable = ojson::object();
  for (const auto& [name, cands] : desc.searchable_params()) {
    ojson list = ojson::array();
    for (const auto& c : cands) list.push_back(param_json(c));
    searchable[name] = std::move(list);
  }
  ojson d;
  d["name"] = desc.name();
  d["version"] = desc.version();
  d["layers"] = std::move(layers);
  d["activation"] = to_string(desc.activation());
  d["loss"] = to_string(desc.loss());
  d["regularizer"] = {{"kind", to_string(desc.regularizer().kind)},
                      {"alpha", desc.regularizer().alpha},
                      {"rho", desc.regularizer().rho}};
  d["strategy"] = to_string(desc.strategy());
  d["searchable_params"] = std::move(searchable);
  return d;
}

ProxyDescriptor descriptor_from(const json& d) {
  std::vector<LayerSpec> layers;
  for (const auto& lj : d.at("layers")) {
    const auto kind = parse_layer_kind(lj.at("kind").get<std::string>());
    const auto inputs = lj.at("inputs").get<std::size_t>();
    if (kind == LayerKind::soft_binning) {
      layers.push_back(LayerSpec::soft_binning(inputs, lj.at("cuts_per_feature").get<std::size_t>(),
                                               lj.at("temperature").get<double>()));
    } else {
      layers.push_back(LayerSpec::dense(inputs, lj.at("outputs").get<std::size_t>(),
                                        parse_activation(lj.at("activation").get<std::string>())));
    }
    if (layers.back().outputs != lj.at("outputs").get<std::size_t>()) {
      throw DimensionError("layer output width does not match its kind");
    }
  }
  const auto& rj = d.at("regularizer");
  Regularizer reg{parse_regularizer(rj.at("kind").get<std::string>()), rj.at("alpha").get<double>(),
                  rj.at("rho").get<double>()};
  std::map<std::string, std::vector<ParamValue>> searchable;
  if (d.contains("searchable_params")) {
    for (const auto& [name, list] : d.at("searchable_params").items()) {
      for (const auto& c : list) searchable[name].push_back(param_from(c));
    }
  }
  return ProxyDescriptor(d.at("name").get<std::string>(), std::move(layers),
                         parse_activation(d.at("activation").get<std::string>()),
                         parse_loss(d.at("loss").get<std::string>()), reg,
                         parse_strategy(d.at("strategy").get<std::string>()),
                         d.value("version", std::string("default")), std::move(searchable));
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + " is not valid JSON: " + e.what(), e.byte);
  }
}

template <typename F>
auto guarded(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(std::string(what) + " is missing or mistypes a field: " + e.what());
  }
}

ojson train_json(const TrainConfig& t) {
  ojson j;
  j["optimizer"] = to_string(t.optimizer);
  j["learning_rate"] = t.learning_rate;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["seed"] = t.seed;
  j["validation_fraction"] = t.validation_fraction;
  return j;
}

TrainConfig train_from(const json& j) {
  TrainConfig t;
  t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  t.learning_rate = j.at("learning_rate").get<double>();
  t.epochs = j.at("epochs").get<std::size_t>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.validation_fraction = j.at("validation_fraction").get<double>();
  t.validate();
  return t;
}

}  // namespace

std::string descriptor_to_json(const ProxyDescriptor& desc) { return descriptor_ojson(desc).dump(2); }

ProxyDescriptor descriptor_from_json(std::string_view text) {
  const auto j = parse_json(text, "descriptor");
  return guarded("descriptor", [&] { return descriptor_from(j); });
}

std::string to_json(const NativeModelDoc& doc) {
  check_weights(doc.descriptor, doc.weights);
  ojson root;
  root["format_version"] = NativeModelDoc::kFormatVersion;
  root["kind"] = "proxy";
  root["descriptor"] = descriptor_ojson(doc.descriptor);
  ojson weights = ojson::object();
  for (const auto& b : doc.weights) weights[b.name] = matrix_json(b.value);
  root["weights"] = std::move(weights);
  const auto& m = doc.metadata;
  ojson meta;
  meta["primal_family"] = m.primal_family;
  meta["strategy"] = to_string(m.strategy);
  meta["seed"] = m.seed;
  meta["train_config"] = train_json(m.train_config);
  meta["task"] = to_string(m.task);
  meta["registry_version"] = m.registry_version;
  if (m.scaler_means && m.scaler_stds) {
    meta["scaler"] = {{"means", *m.scaler_means}, {"stds", *m.scaler_stds}};
  }
  meta["feature_names"] = m.feature_names;
  meta["class_names"] = m.class_names;
  root["metadata"] = std::move(meta);
  return root.dump(2) + "\n";
}

NativeModelDoc native_from_json(std::string_view text) {
  const auto root = parse_json(text, "model document");
  return guarded("model document", [&] {
    if (!root.is_object() || !root.contains("format_version")) {
      throw InputError("model document lacks format_version");
    }
    const int version = root.at("format_version").get<int>();
    if (version != NativeModelDoc::kFormatVersion) {
      throw InputError("unsupported model format_version " + std::to_string(version));
    }
    auto desc = descriptor_from(root.at("descriptor"));
    Rng rng(0);
    auto weights = init_weights(desc, rng);
    const auto& wj = root.at("weights");
    if (wj.size() != weights.size()) {
      throw DimensionError("model document has " + std::to_string(wj.size()) + " weight blocks, descriptor needs " +
                           std::to_string(weights.size()));
    }
    for (auto& b : weights) {
      if (!wj.contains(b.name)) throw DimensionError("model document lacks weight block '" + b.name + "'");
      Matrix value = matrix_from(wj.at(b.name), b.name);
      if (value.rows() != b.value.rows() || value.cols() != b.value.cols()) {
        throw DimensionError("weight block '" + b.name + "' has shape " + std::to_string(value.rows()) + "x" +
                             std::to_string(value.cols()) + ", descriptor needs " + std::to_string(b.value.rows()) +
                             "x" + std::to_string(b.value.cols()));
      }
      b.value = std::move(value);
    }
    const auto& mj = root.at("metadata");
    NativeMetadata meta;
    meta.primal_family = mj.at("primal_family").get<std::string>();
    meta.strategy = parse_strategy(mj.at("strategy").get<std::string>());
    meta.seed = mj.at("seed").get<std::uint64_t>();
    meta.train_config = train_from(mj.at("train_config"));
    meta.task = parse_task(mj.at("task").get<std::string>());
    meta.registry_version = mj.value("registry_version", std::string("default"));
    if (mj.contains("scaler")) {
      meta.scaler_means = mj.at("scaler").at("means").get<std::vector<double>>();
      meta.scaler_stds = mj.at("scaler").at("stds").get<std::vector<double>>();
      if (meta.scaler_means->size() != desc.input_width() || meta.scaler_stds->size() != desc.input_width()) {
        throw DimensionError("scaler statistics do not match the proxy input width");
      }
    }
    meta.feature_names = mj.value("feature_names", std::vector<std::string>{});
    meta.class_names = mj.value("class_names", std::vector<std::string>{});
    return NativeModelDoc{std::move(desc), std::move(weights), std::move(meta)};
  });
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

void save_native(const NativeModelDoc& doc, const std::string& path) { write_text_file(path, to_json(doc)); }

NativeModelDoc load_native(const std::string& path) { return native_from_json(read_text_file(path)); }

std::string primal_to_json(const PrimalModel& model, const Scaler* scaler) {
  if (!model.fitted()) throw StateError("cannot serialize an unfitted model");
  ojson root;
  root["format_version"] = NativeModelDoc::kFormatVersion;
  root["kind"] = "primal";
  root["family"] = to_string(model.family());
  ojson hp = ojson::object();
  for (const auto& [k, v] : model.hyperparams()) hp[k] = v;
  root["hyperparams"] = std::move(hp);
  root["num_features"] = model.num_features();
  root["num_classes"] = model.num_classes();
  root["coefficients"] = matrix_json(model.coefficients());
  root["intercepts"] = model.intercepts();
  ojson tree = ojson::array();
  for (const auto& n : model.tree()) {
    ojson nj;
    nj["feature_index"] = n.feature_index;
    nj["threshold"] = n.threshold;
    nj["left"] = n.left;
    nj["right"] = n.right;
    if (n.leaf_class) nj["leaf_class"] = *n.leaf_class;
    nj["leaf_distribution"] = n.leaf_distribution;
    nj["depth"] = n.depth;
    tree.push_back(std::move(nj));
  }
  root["tree"] = std::move(tree);
  if (scaler && scaler->fitted()) root["scaler"] = {{"means", scaler->means()}, {"stds", scaler->stds()}};
  return root.dump(2) + "\n";
}

PrimalModel primal_from_json(std::string_view text, std::optional<Scaler>* scaler) {
  const auto root = parse_json(text, "primal model document");
  return guarded("primal model document", [&] {
    if (root.value("kind", std::string()) != "primal") throw InputError("document is not a primal model");
    Hyperparams hp;
    for (const auto& [k, v] : root.at("hyperparams").items()) hp[k] = v.get<double>();
    std::vector<TreeNode> tree;
    for (const auto& nj : root.at("tree")) {
      TreeNode n;
      n.feature_index = nj.at("feature_index").get<std::size_t>();
      n.threshold = nj.at("threshold").get<double>();
      n.left = nj.at("left").get<int>();
      n.right = nj.at("right").get<int>();
      if (nj.contains("leaf_class")) n.leaf_class = nj.at("leaf_class").get<int>();
      n.leaf_distribution = nj.at("leaf_distribution").get<std::vector<double>>();
      n.depth = nj.at("depth").get<std::size_t>();
      tree.push_back(std::move(n));
    }
    if (scaler) {
      scaler->reset();
      if (root.contains("scaler")) {
        *scaler = Scaler::from_stats(root.at("scaler").at("means").get<std::vector<double>>(),
                                     root.at("scaler").at("stds").get<std::vector<double>>());
      }
    }
    return PrimalModel::from_parameters(parse_family(root.at("family").get<std::string>()), std::move(hp),
                                        root.at("num_features").get<std::size_t>(),
                                        root.at("num_classes").get<std::size_t>(),
                                        matrix_from(root.at("coefficients"), "coefficients"),
                                        root.at("intercepts").get<std::vector<double>>(), std::move(tree));
  });
}

std::string document_kind(std::string_view text) {
  try {
    const auto root = json::parse(text);
    if (!root.is_object()) return "";
    const auto kind = root.value("kind", std::string());
    if (kind == "primal" || kind == "proxy") return kind;
    return root.contains("descriptor") ? "proxy" : "";
  } catch (const json::exception&) {
    return "";
  }
}

}  // namespace doppel
