#pragma once

#include "curvedit/matrix.hpp"

#include <vector>

namespace curvedit {

/// Eigendecomposition of a symmetric matrix. Eigenvalues sorted descending;
/// eigenvector columns aligned with them. Equal eigenvalues keep the stable
/// order of their original (pre-sort) indices.
struct SymEig {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;  // columns are eigenvectors
};

/// Symmetric eigendecomposition via cyclic Jacobi sweeps. The input is
/// symmetrized as (m + m^T)/2 first; entrywise asymmetry beyond 1e-10
/// is rejected. With clamp_nonnegative, eigenvalues in [-1e-10, 0) are set
/// to 0 (for second-moment inputs, which are PSD up to roundoff).
SymEig sym_eig(const Matrix& m, bool clamp_nonnegative = false);

}  // namespace curvedit
