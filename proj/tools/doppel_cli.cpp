// Command-line front end over the C interface.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include "doppel/doppel.h"

namespace {

struct Failure {
  dp_status status;
  std::string message;
};

void check(dp_status s) {
  if (s != DP_OK) throw Failure{s, dp_last_error()};
}

[[noreturn]] void usage_error(const std::string& msg) { throw Failure{DP_ERR_INPUT, msg}; }

int exit_code(dp_status s) {
  switch (s) {
    case DP_OK:
      return 0;
    case DP_ERR_INTERNAL:
    case DP_ERR_NUMERIC:
    case DP_ERR_SEARCH:
    case DP_ERR_EXPORT:
    case DP_ERR_EVALUATION:
      return 2;
    default:
      return 1;
  }
}

struct DatasetDel {
  void operator()(dp_dataset* p) const { dp_dataset_free(p); }
};
struct PrimalDel {
  void operator()(dp_primal* p) const { dp_primal_free(p); }
};
struct ModelDel {
  void operator()(dp_model* p) const { dp_model_free(p); }
};
using DatasetPtr = std::unique_ptr<dp_dataset, DatasetDel>;
using PrimalPtr = std::unique_ptr<dp_primal, PrimalDel>;
using ModelPtr = std::unique_ptr<dp_model, ModelDel>;

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { dp_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

// Options after merging flags, the config file and defaults.
struct Options {
  std::string config;
  std::string dataset;
  std::string target;
  std::string task;
  std::string model;
  std::string strategy;
  std::string params;
  std::string hyperparams;
  std::string out;
  std::string row;
  std::optional<std::uint64_t> seed;
  std::optional<double> test_size;
  std::size_t depth = 4;
  bool no_timing = false;
  nlohmann::json train = nlohmann::json::object();
};

nlohmann::json toml_to_json(const toml::node& node) {
  if (auto t = node.as_table()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (auto a = node.as_array()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (auto v = node.as_string()) return v->get();
  if (auto v = node.as_integer()) return v->get();
  if (auto v = node.as_floating_point()) return v->get();
  if (auto v = node.as_boolean()) return v->get();
  usage_error("unsupported value type in config file");
}

// Fills every option the command line left unset from the TOML file.
void apply_config(Options& o) {
  if (o.config.empty()) return;
  nlohmann::json cfg;
  try {
    cfg = toml_to_json(toml::parse_file(o.config));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config '" << o.config << "': " << e.description() << " at line " << e.source().begin.line;
    throw Failure{DP_ERR_PARSE, msg.str()};
  }
  const auto text = [&](const char* key, std::string& field) {
    if (field.empty() && cfg.contains(key)) {
      const auto& v = cfg.at(key);
      field = v.is_string() ? v.get<std::string>() : v.dump();
    }
  };
  text("dataset", o.dataset);
  text("target", o.target);
  text("task", o.task);
  text("model", o.model);
  text("strategy", o.strategy);
  text("params", o.params);
  text("hyperparams", o.hyperparams);
  text("out", o.out);
  try {
    if (!o.seed && cfg.contains("seed")) o.seed = cfg.at("seed").get<std::uint64_t>();
    if (!o.test_size && cfg.contains("test_size")) o.test_size = cfg.at("test_size").get<double>();
  } catch (const nlohmann::json::exception&) {
    usage_error("config seed must be a non-negative integer and test_size a number");
  }
  if (cfg.contains("train")) {
    if (!cfg.at("train").is_object()) usage_error("config [train] must be a table");
    for (const auto& [k, v] : cfg.at("train").items())
      if (!o.train.contains(k)) o.train[k] = v;
  }
  for (const auto& [k, v] : cfg.items()) {
    static const std::vector<std::string> known{"dataset", "target", "task", "model", "strategy", "params",
                                                "hyperparams", "out", "seed", "test_size", "train"};
    if (std::find(known.begin(), known.end(), k) == known.end()) usage_error("unknown config key '" + k + "'");
  }
}

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("DOPPEL_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    usage_error(std::string("DOPPEL_SEED must be a non-negative integer, got '") + env + "'");
  }
  return 0;
}

double resolve_test_size(const Options& o) { return o.test_size.value_or(0.6); }

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string family_task(const std::string& family) {
  static const std::vector<std::string> classifiers{"logistic", "logistic_regression", "LogisticRegression",
                                                    "linear_svc", "svc", "LinearSVC",
                                                    "decision_tree", "cart", "DecisionTreeClassifier"};
  return std::find(classifiers.begin(), classifiers.end(), family) != classifiers.end() ? "classification"
                                                                                         : "regression";
}

DatasetPtr load_dataset(const Options& o, const std::string& default_task) {
  if (o.dataset.empty()) usage_error("--dataset is required");
  dp_dataset* ds = nullptr;
  if (o.dataset == "iris" || o.dataset == "diabetes") {
    check(dp_dataset_builtin(o.dataset.c_str(), &ds));
  } else {
    if (o.target.empty()) usage_error("--target is required for CSV datasets");
    const std::string task = o.task.empty() ? default_task : o.task;
    check(dp_dataset_load_csv(o.dataset.c_str(), o.target.c_str(), task.c_str(), &ds));
  }
  return DatasetPtr(ds);
}

std::vector<double> parse_row(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      usage_error("--row holds a non-numeric value '" + cell + "'");
    }
  }
  if (values.empty()) usage_error("--row is empty");
  return values;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Standardize all rows, then split.
std::pair<DatasetPtr, DatasetPtr> prepared_split(const Options& o, const std::string& default_task) {
  auto ds = load_dataset(o, default_task);
  check(dp_dataset_standardize(ds.get()));
  dp_dataset* train = nullptr;
  dp_dataset* test = nullptr;
  check(dp_dataset_split(ds.get(), resolve_test_size(o), resolve_seed(o), &train, &test));
  return {DatasetPtr(train), DatasetPtr(test)};
}

// --params takes inline JSON or the path of a JSON file.
std::string params_text(const std::string& value) {
  if (value.empty()) return value;
  const auto first = value.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && value[first] == '{') return value;
  std::ifstream in(value, std::ios::binary);
  if (!in) usage_error("--params is neither a JSON object nor a readable file: '" + value + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string metric_name(const std::string& task) { return task == "classification" ? "accuracy" : "r2"; }

int cmd_fit(const Options& o) {
  if (o.model.empty()) usage_error("--model is required");
  dp_primal* raw = nullptr;
  check(dp_primal_new(o.model.c_str(), o.hyperparams.empty() ? nullptr : o.hyperparams.c_str(), &raw));
  PrimalPtr primal(raw);
  const auto task = family_task(o.model);
  auto [train, test] = prepared_split(o, task);
  check(dp_primal_fit(primal.get(), train.get()));
  double metric = 0.0;
  check(dp_primal_score(primal.get(), test.get(), &metric));
  std::cout << "primal " << metric_name(task) << "=" << fmt(metric) << "\n";
  if (!o.out.empty()) {
    check(dp_primal_save(primal.get(), o.out.c_str()));
    std::cout << "wrote " << o.out << "\n";
  }
  return 0;
}

int cmd_dope(const Options& o) {
  if (o.model.empty()) usage_error("--model is required");
  PrimalPtr primal;
  dp_primal* raw = nullptr;
  bool prefitted = false;
  if (ends_with(o.model, ".json")) {
    check(dp_primal_load(o.model.c_str(), &raw));
    prefitted = true;
  } else {
    check(dp_primal_new(o.model.c_str(), o.hyperparams.empty() ? nullptr : o.hyperparams.c_str(), &raw));
  }
  primal.reset(raw);
  const char* family = nullptr;
  check(dp_primal_family(primal.get(), &family));
  const auto task = family_task(family);
  auto [train, test] = prepared_split(o, task);

  // A family name is doped unfitted, as in the one-line usage; a saved
  // primal is doped as fitted.
  nlohmann::json train_opts = o.train;
  train_opts["seed"] = resolve_seed(o);
  dp_model* mraw = nullptr;
  check(dp_dope(primal.get(), o.strategy.empty() ? nullptr : o.strategy.c_str(), train_opts.dump().c_str(), &mraw));
  ModelPtr model(mraw);
  const char* strategy = nullptr;
  check(dp_model_strategy(model.get(), &strategy));
  int fitted = 0;
  check(dp_model_is_fitted(model.get(), &fitted));
  if (!(prefitted && fitted && std::string(strategy) == "exact")) {
    const auto params = params_text(o.params);
    check(dp_model_fit(model.get(), train.get(), params.empty() ? nullptr : params.c_str()));
  }
  double score[2] = {0.0, 0.0};
  check(dp_model_score(model.get(), test.get(), score));
  if (!prefitted) check(dp_primal_fit(primal.get(), train.get()));
  double primal_metric = 0.0;
  check(dp_primal_score(primal.get(), test.get(), &primal_metric));
  std::size_t configs = 0;
  check(dp_model_configs_evaluated(model.get(), &configs));
  std::cout << "strategy=" << strategy << "\n"
            << "configs_evaluated=" << configs << "\n"
            << "doped loss=" << fmt(score[0]) << " " << metric_name(task) << "=" << fmt(score[1]) << "\n"
            << "primal " << metric_name(task) << "=" << fmt(primal_metric) << "\n";
  if (!o.params.empty()) {
    OwnedString summary;
    check(dp_model_search_summary(model.get(), &summary.p));
    std::cout << "search=" << summary.str() << "\n";
  }
  if (!o.out.empty()) {
    std::string base = o.out;
    if (ends_with(base, ".json")) base.resize(base.size() - 5);
    check(dp_model_save(model.get(), base.c_str()));
    std::cout << "wrote " << base << ".onnx and " << base << ".json\n";
  }
  return 0;
}

ModelPtr load_model(const Options& o) {
  if (o.model.empty()) usage_error("--model <model.json> is required");
  dp_model* raw = nullptr;
  check(dp_model_load(o.model.c_str(), &raw));
  return ModelPtr(raw);
}

std::string model_task(dp_model* m) {
  int classifier = 0;
  check(dp_model_is_classifier(m, &classifier));
  return classifier ? "classification" : "regression";
}

int cmd_score(const Options& o) {
  auto model = load_model(o);
  const auto task = model_task(model.get());
  auto ds = load_dataset(o, task);
  dp_dataset* train = nullptr;
  dp_dataset* test = nullptr;
  check(dp_dataset_split(ds.get(), resolve_test_size(o), resolve_seed(o), &train, &test));
  DatasetPtr tr(train), te(test);
  double score[2] = {0.0, 0.0};
  check(dp_model_score(model.get(), te.get(), score));
  std::cout << "loss=" << fmt(score[0]) << " " << metric_name(task) << "=" << fmt(score[1]) << "\n";
  return 0;
}

int cmd_predict(const Options& o) {
  auto model = load_model(o);
  std::vector<double> pred;
  if (!o.row.empty()) {
    const auto x = parse_row(o.row);
    pred.resize(1);
    check(dp_model_predict(model.get(), x.data(), 1, x.size(), pred.data()));
  } else {
    auto ds = load_dataset(o, model_task(model.get()));
    std::size_t rows = 0;
    check(dp_dataset_shape(ds.get(), &rows, nullptr, nullptr));
    pred.resize(rows);
    check(dp_model_predict_dataset(model.get(), ds.get(), pred.data(), pred.size()));
  }
  const bool classifier = model_task(model.get()) == "classification";
  for (double v : pred) {
    if (classifier) std::cout << static_cast<long long>(v) << "\n";
    else std::cout << fmt(v) << "\n";
  }
  return 0;
}

int cmd_export(const Options& o) {
  if (o.out.empty()) usage_error("--out <file.onnx> is required");
  auto model = load_model(o);
  check(dp_model_export_onnx(model.get(), o.out.c_str()));
  OwnedString summary;
  check(dp_onnx_inspect(o.out.c_str(), &summary.p));
  std::cout << summary.str() << "\n";
  return 0;
}

int cmd_explain(const Options& o) {
  auto model = load_model(o);
  auto ds = load_dataset(o, model_task(model.get()));
  std::size_t rows = 0, cols = 0;
  check(dp_dataset_shape(ds.get(), &rows, &cols, nullptr));
  std::vector<double> x;
  if (!o.row.empty()) {
    x = parse_row(o.row);
  } else {
    std::vector<double> all(rows * cols);
    check(dp_dataset_features(ds.get(), all.data(), all.size()));
    x.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cols));
  }
  OwnedString text;
  check(dp_model_explain(model.get(), ds.get(), x.data(), x.size(), o.depth, &text.p, nullptr));
  std::cout << text.str();
  return 0;
}

int cmd_bench(const Options& o) {
  OwnedString csv, table;
  int in_band = 0;
  check(dp_bench_run(resolve_seed(o), resolve_test_size(o), o.no_timing ? 0 : 1, &csv.p, &table.p, &in_band));
  std::cout << table.str();
  if (!o.out.empty()) {
    std::ofstream f(o.out, std::ios::binary);
    if (!(f << csv.str())) throw Failure{DP_ERR_IO, "cannot write '" + o.out + "'"};
    std::cout << "wrote " << o.out << "\n";
  } else {
    std::cout << "\n" << csv.str();
  }
  std::cout << (in_band ? "all rows within tolerance\n" : "some rows outside tolerance\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doppel: transpile classical models into neural network proxies"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "TOML file supplying defaults for unset options");
    sub->add_option("--seed", o.seed, "Random seed (falls back to DOPPEL_SEED, then 0)");
  };
  const auto data_opts = [&](CLI::App* sub) {
    sub->add_option("--dataset", o.dataset, "iris, diabetes or a CSV path");
    sub->add_option("--target", o.target, "Target column of a CSV dataset");
    sub->add_option("--task", o.task, "classification or regression (CSV datasets)");
    sub->add_option("--test-size", o.test_size, "Held-out fraction (default 0.6)");
  };

  auto* fit = app.add_subcommand("fit", "Fit a classical model and score it on the test split");
  common(fit);
  data_opts(fit);
  fit->add_option("--model", o.model, "Model family, e.g. logistic or ridge");
  fit->add_option("--hyperparams", o.hyperparams, "JSON object of hyperparameters");
  fit->add_option("--out", o.out, "Write the fitted model as JSON");

  auto* dope = app.add_subcommand("dope", "Transpile a model into a neural proxy and train it");
  common(dope);
  data_opts(dope);
  dope->add_option("--model", o.model, "Model family or a fitted model JSON from `fit`");
  dope->add_option("--hyperparams", o.hyperparams, "JSON object of hyperparameters");
  dope->add_option("--strategy", o.strategy, "exact, approximate or universal")
      ->check(CLI::IsMember({"exact", "approximate", "universal", "default"}));
  dope->add_option("--params", o.params, "Search grid as inline JSON or a JSON file");
  dope->add_option("--out", o.out, "Write <out>.onnx and <out>.json");

  auto* score = app.add_subcommand("score", "Score a saved model on the test split");
  common(score);
  data_opts(score);
  score->add_option("--model", o.model, "Saved model JSON");

  auto* predict = app.add_subcommand("predict", "Predict with a saved model");
  common(predict);
  data_opts(predict);
  predict->add_option("--model", o.model, "Saved model JSON");
  predict->add_option("--row", o.row, "One comma-separated feature row");

  auto* exp = app.add_subcommand("export-onnx", "Export a saved model to ONNX");
  common(exp);
  exp->add_option("--model", o.model, "Saved model JSON");
  exp->add_option("--out", o.out, "Destination .onnx file");

  auto* explain = app.add_subcommand("explain", "Explain one prediction as a decision path");
  common(explain);
  data_opts(explain);
  explain->add_option("--model", o.model, "Saved model JSON");
  explain->add_option("--row", o.row, "Feature row to explain (default: first dataset row)");
  explain->add_option("--depth", o.depth, "Surrogate tree depth")->check(CLI::Range(1, 16));

  auto* bench = app.add_subcommand("bench", "Reproduce the reference comparison table");
  common(bench);
  bench->add_option("--test-size", o.test_size, "Held-out fraction (default 0.6)");
  bench->add_option("--out", o.out, "Write the CSV here instead of stdout");
  bench->add_flag("--no-timing", o.no_timing, "Report runtime 0 for byte-stable output");

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    apply_config(o);
    if (*fit) return cmd_fit(o);
    if (*dope) return cmd_dope(o);
    if (*score) return cmd_score(o);
    if (*predict) return cmd_predict(o);
    if (*exp) return cmd_export(o);
    if (*explain) return cmd_explain(o);
    if (*bench) return cmd_bench(o);
  } catch (const Failure& f) {
    std::cerr << "error (" << dp_status_name(f.status) << "): " << f.message << "\n";
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
