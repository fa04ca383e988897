#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "doppel/matrix.hpp"

namespace doppel {

enum class Task { regression, classification };

std::string_view to_string(Task t) noexcept;
Task parse_task(std::string_view name);

/// Feature matrix plus targets. Classification targets hold integral class
/// ids 0..K-1 stored as doubles.
struct Dataset {
  Matrix X;
  std::vector<double> y;
  std::vector<std::string> feature_names;
  Task task = Task::regression;
  std::string name;
  /// Original label strings in id order; empty for regression.
  std::vector<std::string> class_names;

  std::size_t rows() const noexcept { return X.rows(); }
  std::size_t features() const noexcept { return X.cols(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
};

/// Parses a header-first comma-separated file. Classification targets may be
/// arbitrary strings; ids are assigned by first occurrence.
Dataset load_csv(const std::filesystem::path& path, std::string_view target_column, Task task);
Dataset parse_csv(std::string_view text, std::string_view target_column, Task task,
                  std::string_view name = "csv");

/// Bundled copies of UCI Iris (150x4, 3 classes) and Diabetes (442x10).
Dataset builtin(std::string_view name);

/// Number of classes implied by integral labels (max + 1); throws InputError
/// for negative or non-integral values.
std::size_t count_classes(const std::vector<double>& labels);

class Scaler {
 public:
  Matrix fit_transform(const Matrix& X);
  Matrix transform(const Matrix& X) const;
  /// Restores a fitted scaler from saved statistics.
  static Scaler from_stats(std::vector<double> means, std::vector<double> stds);

  bool fitted() const noexcept { return fitted_; }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& stds() const noexcept { return stds_; }

 private:
  std::vector<double> means_;
  std::vector<double> stds_;
  bool fitted_ = false;
};

struct Split {
  Matrix X_train;
  std::vector<double> y_train;
  Matrix X_test;
  std::vector<double> y_test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

/// Seeded shuffle; the first round(n * test_size) shuffled rows form the
/// test set.
Split train_test_split(const Matrix& X, const std::vector<double>& y, double test_size,
                       std::uint64_t seed);

}  // namespace doppel
