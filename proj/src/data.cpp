#include "doppel/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "doppel/errors.hpp"
#include "doppel/rng.hpp"
#include "bundled_data.hpp"

namespace doppel {

std::string_view to_string(Task t) noexcept {
  return t == Task::regression ? "regression" : "classification";
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::regression;
  if (name == "classification") return Task::classification;
  throw InputError("unknown task '" + std::string(name) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

}  // namespace

Dataset parse_csv(std::string_view text, std::string_view target_column, Task task,
                  std::string_view name) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF) text.remove_prefix(3);

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw InputError("csv '" + std::string(name) + "' has no header row");

  const auto header = split_fields(lines[0]);
  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw InputError("csv '" + std::string(name) + "' has no column named '" +
                     std::string(target_column) + "'");
  }
  const auto target_idx = static_cast<std::size_t>(target_it - header.begin());

  Dataset ds;
  ds.task = task;
  ds.name = std::string(name);
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != target_idx) ds.feature_names.emplace_back(header[c]);

  const std::size_t d = header.size() - 1;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> label_ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    // Row numbers are 1-based file lines so errors point at the editor line.
    const std::size_t row_no = li + 1;
    if (trim(lines[li]).empty()) throw InputError("csv row " + std::to_string(row_no) + " is empty");
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw InputError("csv row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == target_idx) continue;
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw InputError("csv row " + std::to_string(row_no) + ": non-numeric value '" +
                         std::string(fields[c]) + "' in column '" + std::string(header[c]) + "'");
      }
      values.push_back(v);
    }
    const auto cell = fields[target_idx];
    if (task == Task::classification) {
      const auto [it, inserted] = label_ids.try_emplace(std::string(cell), ds.class_names.size());
      if (inserted) ds.class_names.emplace_back(cell);
      ds.y.push_back(static_cast<double>(it->second));
    } else {
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw InputError("csv row " + std::to_string(row_no) + ": non-numeric target '" +
                         std::string(cell) + "'");
      }
      ds.y.push_back(v);
    }
  }
  if (ds.y.empty()) throw InputError("csv '" + std::string(name) + "' has no data rows");
  ds.X = Matrix(ds.y.size(), d, std::move(values));
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view target_column, Task task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), target_column, task, path.stem().string());
}

Dataset builtin(std::string_view name) {
  if (name == "iris") return parse_csv(bundled::kIrisCsv, "species", Task::classification, "iris");
  if (name == "diabetes") {
    return parse_csv(bundled::kDiabetesCsv, "progression", Task::regression, "diabetes");
  }
  throw LookupError("unknown builtin dataset '" + std::string(name) + "' (known: iris, diabetes)");
}

std::size_t count_classes(const std::vector<double>& labels) {
  double mx = -1.0;
  for (double v : labels) {
    if (v < 0.0 || v != std::floor(v)) {
      throw InputError("classification labels must be non-negative integers");
    }
    mx = std::max(mx, v);
  }
  return static_cast<std::size_t>(mx + 1.0);
}

Matrix Scaler::fit_transform(const Matrix& X) {
  if (X.rows() == 0) throw InputError("cannot fit a scaler on zero rows");
  const std::size_t n = X.rows();
  means_.assign(X.cols(), 0.0);
  stds_.assign(X.cols(), 0.0);
  for (std::size_t c = 0; c < X.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += X(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (X(r, c) - mean) * (X(r, c) - mean);
    var /= static_cast<double>(n);
    means_[c] = mean;
    stds_[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  fitted_ = true;
  return transform(X);
}

Scaler Scaler::from_stats(std::vector<double> means, std::vector<double> stds) {
  if (means.size() != stds.size()) throw DimensionError("scaler means and stds differ in length");
  for (double s : stds) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("scaler std must be positive and finite");
  }
  Scaler sc;
  sc.means_ = std::move(means);
  sc.stds_ = std::move(stds);
  sc.fitted_ = true;
  return sc;
}

Matrix Scaler::transform(const Matrix& X) const {
  if (!fitted_) throw StateError("scaler used before fit");
  if (X.cols() != means_.size()) {
    throw DimensionError("scaler fitted on " + std::to_string(means_.size()) +
                         " columns, got " + std::to_string(X.cols()));
  }
  Matrix out(X.rows(), X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c) out(r, c) = (X(r, c) - means_[c]) / stds_[c];
  return out;
}

Split train_test_split(const Matrix& X, const std::vector<double>& y, double test_size,
                       std::uint64_t seed) {
  if (X.rows() != y.size()) throw DimensionError("train_test_split: X and y row counts differ");
  if (!(test_size > 0.0 && test_size < 1.0)) throw InputError("test_size must lie in (0, 1)");
  const std::size_t n = X.rows();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_size));
  if (n_test == 0 || n_test >= n) {
    throw InputError("test_size " + std::to_string(test_size) + " leaves an empty train or test split for " +
                     std::to_string(n) + " rows");
  }
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  Split s;
  s.test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  s.X_test = X.select_rows(s.test_rows);
  s.X_train = X.select_rows(s.train_rows);
  for (auto r : s.test_rows) s.y_test.push_back(y[r]);
  for (auto r : s.train_rows) s.y_train.push_back(y[r]);
  return s;
}

}  // namespace doppel
