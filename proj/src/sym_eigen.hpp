#pragma once

#include "matrix.hpp"

namespace smoekit {

struct EigenResult {
  Vec values;      // k smallest eigenvalues, ascending
  Matrix vectors;  // n x k, orthonormal columns matching `values`
};

// Symmetric eigendecomposition by cyclic Jacobi sweeps. The matrices in this
// toolkit stay small (similarity matrices over expert counts), so the O(n^3)
// dense method is the right tool and converges unconditionally.
//
// `a` must be square and symmetric within 1e-9; 1 <= k <= n. Eigenvector signs
// are fixed (largest-magnitude component positive) to keep downstream
// clustering deterministic.
EigenResult sym_eigen(const Matrix& a, size_t k);

}  // namespace smoekit
