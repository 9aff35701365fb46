#pragma once

#include "matrix.hpp"

namespace smoekit {

// Pairwise cosine similarity of the columns of h: S[i][j] = <h_i, h_j> /
// (||h_i|| ||h_j||). The diagonal is exactly 1 and entries are clamped to
// [-1, 1]. A zero-norm column raises a degenerate-column error naming the
// column index: such a column carries no routing signal.
Matrix cosine_columns(const Matrix& h);

}  // namespace smoekit
