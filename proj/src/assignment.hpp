#pragma once

#include <cstddef>
#include <vector>

#include "matrix.hpp"

namespace smoekit {

// A bijection row -> column; perm[i] is the column assigned to row i.
struct Assignment {
  std::vector<size_t> perm;

  double value(const Matrix& cost) const;
};

// Exact maximum-weight bipartite assignment on a square cost matrix, solved
// with the shortest-augmenting-path Hungarian method (O(n^3)).
Assignment linear_assignment_max(const Matrix& cost);

}  // namespace smoekit
