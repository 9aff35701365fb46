#include "cosine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace smoekit {

Matrix cosine_columns(const Matrix& h) {
  if (h.rows() < 1) throw_validation("cosine_columns requires at least one row");
  const size_t z = h.cols();

  std::vector<Vec> cols(z);
  Vec norms(z);
  for (size_t j = 0; j < z; ++j) {
    cols[j] = h.col(j);
    norms[j] = norm2(cols[j]);
    if (norms[j] == 0.0) {
      throw Error(ErrorCategory::degenerate,
                  "column " + std::to_string(j) + " has zero norm");
    }
  }

  Matrix s(z, z);
  for (size_t i = 0; i < z; ++i) {
    s.at(i, i) = 1.0;
    for (size_t j = i + 1; j < z; ++j) {
      double c = dot(cols[i], cols[j]) / (norms[i] * norms[j]);
      c = std::clamp(c, -1.0, 1.0);
      s.at(i, j) = c;
      s.at(j, i) = c;
    }
  }
  return s;
}

}  // namespace smoekit
