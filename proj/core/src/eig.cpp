#include "curvedit/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace curvedit {

namespace {

constexpr double kAsymmetryTol = 1e-10;
constexpr int kMaxSweeps = 64;

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  const std::size_t n = a.rows();
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
  return std::sqrt(2.0 * s);
}

// Fix the sign of each eigenvector column so its largest-magnitude
// component is positive. Index ties resolve to the first occurrence.
void canonicalize_column_signs(Matrix& v) {
  const std::size_t n = v.rows();
  for (std::size_t c = 0; c < v.cols(); ++c) {
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double m = std::abs(v(r, c));
      if (m > best) {
        best = m;
        arg = r;
      }
    }
    if (v(arg, c) < 0.0) {
      for (std::size_t r = 0; r < n; ++r) v(r, c) = -v(r, c);
    }
  }
}

}  // namespace

SymEig sym_eig(const Matrix& m, bool clamp_nonnegative) {
  if (m.rows() != m.cols()) {
    throw DimensionError("sym_eig: non-square input " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
  m.require_finite("sym_eig");
  const std::size_t n = m.rows();
  const double scale_ref = std::max(max_abs(m), 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) {
      if (std::abs(m(r, c) - m(c, r)) > kAsymmetryTol * scale_ref) {
        throw NumericError("sym_eig: input asymmetry exceeds tolerance");
      }
    }
  }

  // Work on the symmetrized copy.
  Matrix a(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) a(r, c) = 0.5 * (m(r, c) + m(c, r));
  Matrix v = Matrix::identity(n);

  const double frob = std::max(frobenius_norm(a), 1e-300);
  const double target = 1e-14 * frob;

  // Cyclic Jacobi: fixed (p,q) sweep order for determinism.
  for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_norm(a) > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);

  // Descending eigenvalues; equal values keep original index order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return diag[i] > diag[j]; });

  SymEig out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    double lam = diag[order[c]];
    if (clamp_nonnegative && lam < 0.0 && lam >= -1e-10) lam = 0.0;
    out.eigenvalues[c] = lam;
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
  }
  canonicalize_column_signs(out.eigenvectors);
  return out;
}

}  // namespace curvedit
