#include "doppel/doppel.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

#include "doppel/bench.hpp"
#include "doppel/errors.hpp"
#include "doppel/explain.hpp"
#include "doppel/native_format.hpp"
#include "doppel/onnx.hpp"
#include "doppel/transpiler.hpp"

struct dp_dataset {
  doppel::Dataset data;
  std::optional<doppel::Scaler> scaler;
};

struct dp_primal {
  doppel::PrimalModel model;
  std::optional<doppel::Scaler> scaler;
};

struct dp_model {
  doppel::DopedModel model;
  std::optional<doppel::Scaler> scaler;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
};

namespace {

using namespace doppel;

thread_local std::string g_last_error;

template <typename F>
dp_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return DP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<dp_status>(static_cast<int>(e.kind()));
  } catch (const nlohmann::json::parse_error& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return DP_ERR_PARSE;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("malformed JSON option: ") + e.what();
    return DP_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return DP_ERR_INTERNAL;
  }
}

template <typename T>
T& deref(T* p, const char* what) {
  if (!p) throw InputError(std::string(what) + " is NULL");
  return *p;
}

void need(const void* p, const char* what) {
  if (!p) throw InputError(std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Matrix matrix_from(const double* X, std::size_t rows, std::size_t cols) {
  if (rows > 0) need(X, "X");
  Matrix m(rows, cols);
  if (rows * cols > 0) std::memcpy(m.values().data(), X, rows * cols * sizeof(double));
  return m;
}

/// A model's scaler applies only to data that has not been standardized yet.
Matrix model_inputs(const std::optional<Scaler>& model_scaler, const dp_dataset& ds) {
  if (model_scaler && !ds.scaler) return model_scaler->transform(ds.data.X);
  return ds.data.X;
}

Matrix raw_inputs(const std::optional<Scaler>& scaler, const Matrix& X) {
  return scaler ? scaler->transform(X) : X;
}

std::size_t count_option(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError("training option '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

TrainConfig train_config_from(const nlohmann::json& j, std::vector<std::size_t>* hidden) {
  TrainConfig t;
  if (!j.is_object()) throw ConfigError("training options must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "optimizer") {
      t.optimizer = parse_optimizer(value.get<std::string>());
    } else if (key == "learning_rate") {
      t.learning_rate = value.get<double>();
    } else if (key == "epochs") {
      t.epochs = count_option(value, key);
    } else if (key == "batch_size") {
      t.batch_size = count_option(value, key);
    } else if (key == "seed") {
      t.seed = count_option(value, key);
    } else if (key == "validation_fraction") {
      t.validation_fraction = value.get<double>();
    } else if (key == "hidden_layers" && hidden) {
      if (!value.is_array()) throw ConfigError("training option 'hidden_layers' must be a list of widths");
      hidden->clear();
      for (const auto& w : value) hidden->push_back(count_option(w, key));
    } else {
      throw ConfigError("unknown training option '" + key + "'");
    }
  }
  t.validate();
  return t;
}

}  // namespace

extern "C" {

const char* dp_version(void) { return "0.1.0"; }

const char* dp_status_name(dp_status status) {
  if (status == DP_OK) return "ok";
  if (status >= DP_ERR_INPUT && status <= DP_ERR_INTERNAL) {
    return error_kind_name(static_cast<ErrorKind>(static_cast<int>(status)));
  }
  return "unknown";
}

const char* dp_last_error(void) { return g_last_error.c_str(); }

void dp_string_free(char* s) { std::free(s); }

dp_status dp_dataset_builtin(const char* name, dp_dataset** out) {
  return guard([&] {
    need(name, "name");
    need(out, "out");
    *out = new dp_dataset{builtin(name), std::nullopt};
  });
}

dp_status dp_dataset_load_csv(const char* path, const char* target_column, const char* task, dp_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(target_column, "target_column");
    need(task, "task");
    need(out, "out");
    *out = new dp_dataset{load_csv(path, target_column, parse_task(task)), std::nullopt};
  });
}

dp_status dp_dataset_from_arrays(const double* X, size_t rows, size_t cols, const double* y, const char* task,
                                 dp_dataset** out) {
  return guard([&] {
    need(task, "task");
    need(out, "out");
    if (rows == 0 || cols == 0) throw InputError("dataset needs at least one row and one column");
    need(y, "y");
    Dataset d;
    d.X = matrix_from(X, rows, cols);
    if (!d.X.all_finite()) throw InputError("features contain non-finite values");
    d.y.assign(y, y + rows);
    d.task = parse_task(task);
    d.name = "arrays";
    for (std::size_t j = 0; j < cols; ++j) d.feature_names.push_back("x" + std::to_string(j));
    if (d.task == Task::classification) {
      const auto k = count_classes(d.y);
      for (std::size_t c = 0; c < k; ++c) d.class_names.push_back(std::to_string(c));
    }
    *out = new dp_dataset{std::move(d), std::nullopt};
  });
}

dp_status dp_dataset_shape(const dp_dataset* ds, size_t* rows, size_t* cols, size_t* classes) {
  return guard([&] {
    const auto& d = deref(ds, "dataset").data;
    if (rows) *rows = d.rows();
    if (cols) *cols = d.features();
    if (classes) *classes = d.task == Task::classification ? d.num_classes() : 0;
  });
}

dp_status dp_dataset_features(const dp_dataset* ds, double* out, size_t capacity) {
  return guard([&] {
    const auto& X = deref(ds, "dataset").data.X;
    need(out, "out");
    if (capacity < X.values().size()) throw DimensionError("output buffer holds " + std::to_string(capacity) +
                                                            " values, need " + std::to_string(X.values().size()));
    std::memcpy(out, X.values().data(), X.values().size() * sizeof(double));
  });
}

dp_status dp_dataset_targets(const dp_dataset* ds, double* out, size_t capacity) {
  return guard([&] {
    const auto& y = deref(ds, "dataset").data.y;
    need(out, "out");
    if (capacity < y.size()) throw DimensionError("output buffer too small for targets");
    std::copy(y.begin(), y.end(), out);
  });
}

dp_status dp_dataset_standardize(dp_dataset* ds) {
  return guard([&] {
    auto& d = deref(ds, "dataset");
    if (d.scaler) throw StateError("dataset is already standardized");
    Scaler sc;
    d.data.X = sc.fit_transform(d.data.X);
    d.scaler = std::move(sc);
  });
}

dp_status dp_dataset_split(const dp_dataset* ds, double test_size, uint64_t seed, dp_dataset** train,
                           dp_dataset** test) {
  return guard([&] {
    const auto& d = deref(ds, "dataset");
    need(train, "train");
    need(test, "test");
    auto s = train_test_split(d.data.X, d.data.y, test_size, seed);
    Dataset a = d.data;
    Dataset b = d.data;
    a.X = std::move(s.X_train);
    a.y = std::move(s.y_train);
    b.X = std::move(s.X_test);
    b.y = std::move(s.y_test);
    auto* tr = new dp_dataset{std::move(a), d.scaler};
    auto* te = new (std::nothrow) dp_dataset{std::move(b), d.scaler};
    if (!te) {
      delete tr;
      throw std::bad_alloc();
    }
    *train = tr;
    *test = te;
  });
}

void dp_dataset_free(dp_dataset* ds) { delete ds; }

dp_status dp_primal_new(const char* family, const char* hyperparams_json, dp_primal** out) {
  return guard([&] {
    need(family, "family");
    need(out, "out");
    Hyperparams hp;
    if (hyperparams_json && *hyperparams_json) {
      const auto j = nlohmann::json::parse(hyperparams_json);
      if (!j.is_object()) throw ConfigError("hyperparameters must be a JSON object");
      for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw ConfigError("hyperparameter '" + k + "' must be a number");
        hp[k] = v.get<double>();
      }
    }
    *out = new dp_primal{PrimalModel(parse_family(family), hp), std::nullopt};
  });
}

dp_status dp_primal_fit(dp_primal* model, const dp_dataset* train) {
  return guard([&] {
    auto& m = deref(model, "model");
    const auto& d = deref(train, "dataset");
    m.model.fit(d.data.X, d.data.y);
    m.scaler = d.scaler;
  });
}

dp_status dp_primal_score(const dp_primal* model, const dp_dataset* ds, double* out) {
  return guard([&] {
    const auto& m = deref(model, "model");
    const auto& d = deref(ds, "dataset");
    need(out, "out");
    *out = m.model.score(model_inputs(m.scaler, d), d.data.y);
  });
}

dp_status dp_primal_predict(const dp_primal* model, const double* X, size_t rows, size_t cols, double* out) {
  return guard([&] {
    const auto& m = deref(model, "model");
    need(out, "out");
    const auto pred = m.model.predict(raw_inputs(m.scaler, matrix_from(X, rows, cols)));
    std::copy(pred.begin(), pred.end(), out);
  });
}

dp_status dp_primal_family(const dp_primal* model, const char** out) {
  return guard([&] {
    const auto& m = deref(model, "model");
    need(out, "out");
    *out = to_string(m.model.family()).data();
  });
}

dp_status dp_primal_save(const dp_primal* model, const char* path) {
  return guard([&] {
    const auto& m = deref(model, "model");
    need(path, "path");
    write_text_file(path, primal_to_json(m.model, m.scaler ? &*m.scaler : nullptr));
  });
}

dp_status dp_primal_load(const char* path, dp_primal** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    std::optional<Scaler> scaler;
    auto model = primal_from_json(read_text_file(path), &scaler);
    *out = new dp_primal{std::move(model), std::move(scaler)};
  });
}

void dp_primal_free(dp_primal* model) { delete model; }

dp_status dp_dope(const dp_primal* primal, const char* strategy, const char* train_json, dp_model** out) {
  return guard([&] {
    const auto& p = deref(primal, "primal");
    need(out, "out");
    DopeOptions opts;
    if (strategy && *strategy && std::string(strategy) != "default") opts.strategy = parse_strategy(strategy);
    if (train_json && *train_json) {
      opts.train = train_config_from(nlohmann::json::parse(train_json), &opts.universal_hidden);
    }
    *out = new dp_model{dope(p.model, opts), p.scaler, {}, {}};
  });
}

dp_status dp_model_fit(dp_model* model, const dp_dataset* train, const char* params_json) {
  return guard([&] {
    auto& m = deref(model, "model");
    const auto& d = deref(train, "dataset");
    std::optional<SearchSpace> space;
    if (params_json && *params_json) space = parse_search_space(params_json);
    m.model.fit(d.data.X, d.data.y, space);
    m.scaler = d.scaler;
    m.feature_names = d.data.feature_names;
    m.class_names = d.data.class_names;
  });
}

dp_status dp_model_score(const dp_model* model, const dp_dataset* ds, double out[2]) {
  return guard([&] {
    const auto& m = deref(model, "model");
    const auto& d = deref(ds, "dataset");
    need(out, "out");
    const auto s = m.model.score(model_inputs(m.scaler, d), d.data.y);
    out[0] = s[0];
    out[1] = s[1];
  });
}

dp_status dp_model_predict(const dp_model* model, const double* X, size_t rows, size_t cols, double* out) {
  return guard([&] {
    const auto& m = deref(model, "model");
    need(out, "out");
    const auto pred = m.model.predict(raw_inputs(m.scaler, matrix_from(X, rows, cols)));
    std::copy(pred.begin(), pred.end(), out);
  });
}

dp_status dp_model_predict_dataset(const dp_model* model, const dp_dataset* ds, double* out, size_t capacity) {
  return guard([&] {
    const auto& m = deref(model, "model");
    const auto& d = deref(ds, "dataset");
    need(out, "out");
    if (capacity < d.data.rows()) throw DimensionError("output buffer too small for predictions");
    const auto pred = m.model.predict(model_inputs(m.scaler, d));
    std::copy(pred.begin(), pred.end(), out);
  });
}

dp_status dp_model_is_fitted(const dp_model* model, int* out) {
  return guard([&] {
    need(out, "out");
    *out = deref(model, "model").model.fitted() ? 1 : 0;
  });
}

dp_status dp_model_is_classifier(const dp_model* model, int* out) {
  return guard([&] {
    need(out, "out");
    *out = deref(model, "model").model.is_classifier() ? 1 : 0;
  });
}

dp_status dp_model_strategy(const dp_model* model, const char** out) {
  return guard([&] {
    need(out, "out");
    *out = to_string(deref(model, "model").model.strategy()).data();
  });
}

dp_status dp_model_configs_evaluated(const dp_model* model, size_t* out) {
  return guard([&] {
    need(out, "out");
    *out = deref(model, "model").model.configs_evaluated();
  });
}

dp_status dp_model_search_summary(const dp_model* model, char** out) {
  return guard([&] {
    const auto& m = deref(model, "model");
    need(out, "out");
    const auto& sr = m.model.search_result();
    if (!sr) {
      *out = dup_string("null");
      return;
    }
    const auto config_json = [](const ParamMap& c) {
      nlohmann::ordered_json j = nlohmann::ordered_json::object();
      for (const auto& [k, v] : c) {
        if (const auto* d = std::get_if<double>(&v)) j[k] = *d;
        else j[k] = std::get<std::string>(v);
      }
      return j;
    };
    nlohmann::ordered_json j;
    j["best_config"] = config_json(sr->best_config);
    j["best_index"] = sr->best_index;
    j["best_val_metric"] = sr->best_val_metric;
    j["trials"] = nlohmann::ordered_json::array();
    for (const auto& t : sr->trials) {
      nlohmann::ordered_json tj;
      tj["config"] = config_json(t.config);
      tj["val_metric"] = t.diverged ? nlohmann::ordered_json() : nlohmann::ordered_json(t.val_metric);
      tj["val_loss"] = t.diverged ? nlohmann::ordered_json() : nlohmann::ordered_json(t.val_loss);
      tj["diverged"] = t.diverged;
      j["trials"].push_back(std::move(tj));
    }
    *out = dup_string(j.dump());
  });
}

namespace {

NativeModelDoc native_doc(const dp_model& m) {
  auto doc = m.model.to_native();
  if (m.scaler) {
    doc.metadata.scaler_means = m.scaler->means();
    doc.metadata.scaler_stds = m.scaler->stds();
  }
  doc.metadata.feature_names = m.feature_names;
  doc.metadata.class_names = m.class_names;
  return doc;
}

OnnxGraph export_graph(const dp_model& m) {
  const auto& proxy = m.model.proxy();
  auto g = build_graph(proxy.descriptor, proxy.weights);
  if (m.scaler) g = with_standardization(g, m.scaler->means(), m.scaler->stds());
  return g;
}

}  // namespace

dp_status dp_model_save(const dp_model* model, const char* filename) {
  return guard([&] {
    const auto& m = deref(model, "model");
    need(filename, "filename");
    if (!*filename) throw InputError("save needs a file name");
    const std::string base(filename);
    const auto graph = export_graph(m);
    const auto doc = native_doc(m);
    write_text_file(base + ".onnx", serialize(graph));
    save_native(doc, base + ".json");
  });
}

dp_status dp_model_load(const char* json_path, dp_model** out) {
  return guard([&] {
    need(json_path, "json_path");
    need(out, "out");
    const auto doc = load_native(json_path);
    std::optional<Scaler> scaler;
    if (doc.metadata.scaler_means && doc.metadata.scaler_stds) {
      scaler = Scaler::from_stats(*doc.metadata.scaler_means, *doc.metadata.scaler_stds);
    }
    *out = new dp_model{DopedModel::from_native(doc), std::move(scaler), doc.metadata.feature_names,
                        doc.metadata.class_names};
  });
}

dp_status dp_model_export_onnx(const dp_model* model, const char* path) {
  return guard([&] {
    const auto& m = deref(model, "model");
    need(path, "path");
    write_text_file(path, serialize(export_graph(m)));
  });
}

dp_status dp_model_explain(const dp_model* model, const dp_dataset* reference, const double* x, size_t cols,
                           size_t max_depth, char** text_out, double* fidelity_out) {
  return guard([&] {
    const auto& m = deref(model, "model");
    const auto& ref = deref(reference, "reference");
    need(x, "x");
    need(text_out, "text_out");
    const bool scale = m.scaler && !ref.scaler;
    const Labeler labeler = [&](const Matrix& X) { return m.model.predict(scale ? m.scaler->transform(X) : X); };
    const auto surrogate = fit_surrogate(labeler, ref.data.X, max_depth == 0 ? kDefaultSurrogateDepth : max_depth);
    const auto e = explain(surrogate, std::span<const double>(x, cols));
    *text_out = dup_string(e.render());
    if (fidelity_out) *fidelity_out = surrogate.fidelity;
  });
}

void dp_model_free(dp_model* model) { delete model; }

dp_status dp_onnx_inspect(const char* path, char** summary_out) {
  return guard([&] {
    need(path, "path");
    need(summary_out, "summary_out");
    const auto g = parse_model(read_text_file(path));
    nlohmann::ordered_json j;
    j["ir_version"] = g.ir_version;
    j["opset"] = g.opset_version;
    j["producer_name"] = g.producer_name;
    j["graph"] = g.name;
    j["nodes"] = g.nodes.size();
    j["initializers"] = g.initializers.size();
    nlohmann::ordered_json ops = nlohmann::ordered_json::object();
    for (const auto& [op, n] : op_histogram(g)) ops[op] = n;
    j["ops"] = std::move(ops);
    *summary_out = dup_string(j.dump());
  });
}

dp_status dp_onnx_run(const char* path, const double* X, size_t rows, size_t cols, double* out, size_t capacity,
                      size_t* out_cols) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    const auto g = parse_model(read_text_file(path));
    const auto y = interpret(g, matrix_from(X, rows, cols));
    if (capacity < y.values().size()) throw DimensionError("output buffer too small for graph output");
    std::copy(y.values().begin(), y.values().end(), out);
    if (out_cols) *out_cols = y.cols();
  });
}

dp_status dp_bench_run(uint64_t seed, double test_size, int timing, char** csv_out, char** table_out,
                       int* all_in_band) {
  return guard([&] {
    BenchOptions opts;
    opts.seed = seed;
    opts.test_size = test_size;
    opts.timing = timing != 0;
    const auto rows = run_bench(opts);
    if (all_in_band) {
      *all_in_band = 1;
      for (const auto& r : rows)
        if (!r.primal_within_band() || !r.doped_within_band()) *all_in_band = 0;
    }
    if (csv_out) *csv_out = dup_string(bench_csv(rows));
    if (table_out) *table_out = dup_string(bench_table(rows));
  });
}

}  // extern "C"
