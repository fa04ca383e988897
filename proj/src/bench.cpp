#include "doppel/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "doppel/data.hpp"
#include "doppel/errors.hpp"
#include "doppel/transpiler.hpp"

namespace doppel {

const std::vector<BenchTarget>& bench_targets() {
  static const std::vector<BenchTarget> targets{
      {Family::logistic, "iris", 0.84, 0.82},      {Family::linear, "diabetes", 0.42, 0.40},
      {Family::ridge, "diabetes", 0.44, 0.42},     {Family::lasso, "diabetes", 0.43, 0.43},
      {Family::elasticnet, "diabetes", 0.44, 0.44}, {Family::linear_svc, "iris", 0.84, 0.91},
      {Family::decision_tree, "iris", 0.96, 0.93},
  };
  return targets;
}

bool BenchRow::primal_within_band() const {
  return !failed && std::abs(primal_metric - ref_primal) <= kPrimalTolerance + 1e-12;
}

bool BenchRow::doped_within_band() const {
  if (failed) return false;
  return std::abs(doped_metric - ref_doped) <= kDopedTolerance + 1e-12 ||
         std::abs(doped_metric - primal_metric) <= kOnParTolerance + 1e-12;
}

BenchRow run_bench_row(const BenchTarget& target, const BenchOptions& options) {
  BenchRow row;
  row.algorithm = std::string(to_string(target.family));
  row.dataset = target.dataset;
  row.seed = options.seed;
  row.ref_doped = target.ref_doped;
  row.ref_primal = target.ref_primal;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Dataset ds = builtin(target.dataset);
    Scaler scaler;
    const Matrix X = scaler.fit_transform(ds.X);
    const Split split = train_test_split(X, ds.y, options.test_size, options.seed);
    PrimalModel primal(target.family);
    primal.fit(split.X_train, split.y_train);
    row.primal_metric = primal.score(split.X_test, split.y_test);
    DopeOptions dope_options;
    dope_options.train = options.train;
    dope_options.train.seed = options.seed;
    DopedModel doped = dope(primal, dope_options);
    doped.fit(split.X_train, split.y_train);
    row.doped_metric = doped.score(split.X_test, split.y_test)[1];
    if (!std::isfinite(row.doped_metric) || !std::isfinite(row.primal_metric)) {
      throw NumericError("non-finite metric");
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  row.runtime_seconds = options.timing ? elapsed.count() : 0.0;
  return row;
}

std::vector<BenchRow> run_bench(const BenchOptions& options) {
  std::vector<BenchRow> rows;
  for (const auto& t : bench_targets()) rows.push_back(run_bench_row(t, options));
  return rows;
}

namespace {

std::string num(double v, const char* fmt = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "algorithm,dataset,doped_metric,primal_metric,seed,runtime_seconds\n";
  for (const auto& r : rows) {
    out += r.algorithm + "," + r.dataset + "," + (r.failed ? std::string("nan") : num(r.doped_metric)) + "," +
           (r.failed ? std::string("nan") : num(r.primal_metric)) + "," + std::to_string(r.seed) + "," +
           num(r.runtime_seconds, "%.3f") + "\n";
  }
  return out;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-9s %7s %7s %7s %7s %7s %7s  %s\n", "algorithm", "dataset", "doped",
                "ref", "delta", "primal", "ref", "delta", "status");
  out += line;
  for (const auto& r : rows) {
    if (r.failed) {
      std::snprintf(line, sizeof line, "%-14s %-9s FAILED: %s\n", r.algorithm.c_str(), r.dataset.c_str(),
                    r.error.c_str());
      out += line;
      continue;
    }
    const char* status = r.primal_within_band() && r.doped_within_band() ? "ok" : "out-of-band";
    std::snprintf(line, sizeof line, "%-14s %-9s %7.3f %7.2f %+7.3f %7.3f %7.2f %+7.3f  %s\n", r.algorithm.c_str(),
                  r.dataset.c_str(), r.doped_metric, r.ref_doped, r.doped_metric - r.ref_doped, r.primal_metric,
                  r.ref_primal, r.primal_metric - r.ref_primal, status);
    out += line;
  }
  return out;
}

}  // namespace doppel
