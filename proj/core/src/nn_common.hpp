#pragma once

#include "curvedit/matrix.hpp"
#include "curvedit/nn.hpp"

#include <cmath>
#include <vector>

namespace curvedit::detail {

constexpr double kRmsEps = 1e-6;

// y_r = x_r / rms(x_r); returns per-row rms for the backward pass.
inline Matrix rmsnorm_forward(const Matrix& x, std::vector<double>& rms_out) {
  Matrix y(x.rows(), x.cols());
  rms_out.resize(x.rows());
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) ss += x(r, c) * x(r, c);
    const double rms = std::sqrt(ss * inv_d + kRmsEps);
    rms_out[r] = rms;
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) / rms;
  }
  return y;
}

// dx = (dy - y * mean(dy . y)) / rms, rowwise; exact including eps.
inline Matrix rmsnorm_backward(const Matrix& dy, const Matrix& y, const std::vector<double>& rms) {
  Matrix dx(dy.rows(), dy.cols());
  const double inv_d = 1.0 / static_cast<double>(dy.cols());
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < dy.cols(); ++c) dot += dy(r, c) * y(r, c);
    dot *= inv_d;
    for (std::size_t c = 0; c < dy.cols(); ++c)
      dx(r, c) = (dy(r, c) - y(r, c) * dot) / rms[r];
  }
  return dx;
}

// y = x W^T for W of shape (d_out x d_in).
inline Matrix linear(const Matrix& x, const Matrix& w) { return matmul(x, transpose(w)); }

// Accumulates dW += dy^T x into grad; returns dx = dy W.
inline Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& grad) {
  Matrix dw = matmul(transpose(dy), x);
  for (std::size_t i = 0; i < grad.size(); ++i) grad.data()[i] += dw.data()[i];
  return matmul(dy, w);
}

inline Matrix drop_last_row(const Matrix& m) {
  Matrix out(m.rows() - 1, m.cols());
  for (std::size_t r = 0; r + 1 < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

}  // namespace curvedit::detail
