#include "curvedit/svd.hpp"

#include <cmath>

namespace curvedit {

namespace {

// Replace near-zero columns of `basis` (those flagged in `degenerate`)
// with unit vectors completed by Gram-Schmidt against all other columns,
// trying canonical basis vectors in index order.
void complete_degenerate_columns(Matrix& basis, const std::vector<bool>& degenerate) {
  const std::size_t n = basis.rows();
  const std::size_t k = basis.cols();
  std::size_t next_axis = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (!degenerate[c]) continue;
    while (true) {
      if (next_axis >= n) throw NumericError("svd: failed to complete orthonormal basis");
      std::vector<double> cand(n, 0.0);
      cand[next_axis++] = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (degenerate[j] && j >= c) continue;  // only project on settled columns
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += cand[r] * basis(r, j);
        for (std::size_t r = 0; r < n; ++r) cand[r] -= dot * basis(r, j);
      }
      double norm = 0.0;
      for (double x : cand) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (std::size_t r = 0; r < n; ++r) basis(r, c) = cand[r] / norm;
        break;
      }
    }
  }
}

}  // namespace

Svd svd(const Matrix& m) {
  m.require_finite("svd");
  const std::size_t r = m.rows();
  const std::size_t c = m.cols();
  const std::size_t k = std::min(r, c);
  Svd out;
  out.singular_values.resize(k);

  const bool tall = r >= c;  // eigendecompose the smaller Gram matrix
  const Matrix mt = transpose(m);
  const Matrix gram = tall ? matmul(mt, m) : matmul(m, mt);
  const SymEig eig = sym_eig(gram, /*clamp_nonnegative=*/true);

  const double smax = eig.eigenvalues.empty() ? 0.0 : std::sqrt(std::max(eig.eigenvalues[0], 0.0));
  const double rank_tol = 1e-10 * std::max(smax, 1.0);

  Matrix eig_side(tall ? c : r, k);
  for (std::size_t j = 0; j < k; ++j) {
    out.singular_values[j] = std::sqrt(std::max(eig.eigenvalues[j], 0.0));
    for (std::size_t i = 0; i < eig_side.rows(); ++i) eig_side(i, j) = eig.eigenvectors(i, j);
  }

  // Derive the other factor: u_j = M v_j / s_j (tall) or v_j = M^T u_j / s_j.
  Matrix derived(tall ? r : c, k);
  std::vector<bool> degenerate(k, false);
  const Matrix prod = tall ? matmul(m, eig_side) : matmul(mt, eig_side);
  for (std::size_t j = 0; j < k; ++j) {
    const double s = out.singular_values[j];
    if (s <= rank_tol) {
      out.singular_values[j] = (s < 0.0 ? 0.0 : s);
      degenerate[j] = true;
      continue;
    }
    for (std::size_t i = 0; i < derived.rows(); ++i) derived(i, j) = prod(i, j) / s;
  }
  complete_degenerate_columns(derived, degenerate);

  if (tall) {
    out.u = std::move(derived);
    out.vt = transpose(eig_side);
  } else {
    out.u = std::move(eig_side);
    out.vt = transpose(derived);
  }
  return out;
}

}  // namespace curvedit
