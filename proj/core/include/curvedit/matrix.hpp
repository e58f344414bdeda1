#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvedit {

/// Thrown when operand shapes do not conform.
class DimensionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a computation produces or receives non-finite values.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of 64-bit reals. The single numerical carrier
/// used throughout: weights, covariance factors, eigenbases, masks.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool all_finite() const;
  /// Throws NumericError (tagged with `what`) if any entry is non-finite.
  void require_finite(const std::string& what) const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);

/// ‖a − b‖_F / max(‖b‖_F, tiny); the relative-error yardstick used by the
/// reconstruction and edit-identity checks.
double rel_frobenius_error(const Matrix& a, const Matrix& b);

}  // namespace curvedit
