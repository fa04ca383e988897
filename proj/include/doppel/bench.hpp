#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "doppel/architectures.hpp"

namespace doppel {

struct BenchTarget {
  Family family;
  std::string dataset;
  double ref_doped;
  double ref_primal;
};

/// The seven reference rows, in table order.
const std::vector<BenchTarget>& bench_targets();

inline constexpr double kPrimalTolerance = 0.05;
inline constexpr double kDopedTolerance = 0.08;
/// A doped row also passes when it is this close to its own primal row.
inline constexpr double kOnParTolerance = 0.05;

struct BenchRow {
  std::string algorithm;
  std::string dataset;
  double doped_metric = 0.0;
  double primal_metric = 0.0;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;
  bool failed = false;
  std::string error;
  double ref_doped = 0.0;
  double ref_primal = 0.0;

  bool primal_within_band() const;
  bool doped_within_band() const;
};

struct BenchOptions {
  std::uint64_t seed = 0;
  double test_size = 0.6;
  /// Off writes runtime 0 so repeated runs give identical CSV bytes.
  bool timing = true;
  TrainConfig train;
};

/// Standardizes the full feature matrix, splits, fits the primal model,
/// dopes it with the default strategy, fits and scores both on the test
/// split. A failing row is marked and the run continues.
std::vector<BenchRow> run_bench(const BenchOptions& options = {});
BenchRow run_bench_row(const BenchTarget& target, const BenchOptions& options);

/// algorithm,dataset,doped_metric,primal_metric,seed,runtime_seconds
std::string bench_csv(const std::vector<BenchRow>& rows);
/// Human-readable table with deltas against the reference values.
std::string bench_table(const std::vector<BenchRow>& rows);

}  // namespace doppel
