#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace doppel {

/// Dense row-major float64 matrix. Shapes are checked on every arithmetic
/// entry point; element access is unchecked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);
  static Matrix row(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row_span(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::vector<double> column_copy(std::size_t c) const;
  Matrix transposed() const;
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a · bᵀ, the layout used by dense layers with weights stored [out × in].
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix matmul(const Matrix& a, const Matrix& b);

/// Solves the square system A x = b by Gaussian elimination with partial
/// pivoting. Returns false when a pivot falls below `singular_tol` relative
/// to the largest diagonal magnitude.
bool solve_linear(Matrix a, std::vector<double> b, std::vector<double>& x,
                  double singular_tol = 1e-12);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace doppel
