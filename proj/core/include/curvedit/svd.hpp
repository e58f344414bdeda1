#pragma once

#include "curvedit/eig.hpp"
#include "curvedit/matrix.hpp"

#include <vector>

namespace curvedit {

/// Thin singular value decomposition m = u * diag(singular_values) * vt,
/// with k = min(rows, cols) columns in u and rows in vt. Singular values
/// are sorted descending and nonnegative.
struct Svd {
  Matrix u;
  std::vector<double> singular_values;
  Matrix vt;
};

/// SVD computed through sym_eig of the Gram matrix of the smaller
/// dimension. Deterministic: the eigen side carries the sign convention
/// (largest-magnitude component positive) and the other side is derived
/// from it; null-space columns are completed by Gram-Schmidt over the
/// canonical basis in index order.
Svd svd(const Matrix& m);

}  // namespace curvedit
