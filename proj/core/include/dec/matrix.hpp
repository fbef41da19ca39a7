#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dec {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool all_finite() const noexcept;

  /// Rows picked by index, in the given order (duplicates allowed).
  Matrix gather_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a * bᵀ  (a: n×m, b: p×m) -> n×p
Matrix multiply_transposed(const Matrix& a, const Matrix& b);
/// aᵀ * b  (a: n×m, b: n×p) -> m×p
Matrix transpose_multiply(const Matrix& a, const Matrix& b);
/// a * b   (a: n×m, b: m×p) -> n×p
Matrix multiply(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
double squared_norm(std::span<const double> a) noexcept;

/// Column means (1×cols).
std::vector<double> column_means(const Matrix& a);

/// Throws ShapeError with `what` unless the condition holds.
void require_shape(bool condition, const char* what);

}  // namespace dec
