#include "assignment.hpp"

#include <limits>
#include <string>

#include "error.hpp"

namespace smoekit {

double Assignment::value(const Matrix& cost) const {
  double s = 0.0;
  for (size_t i = 0; i < perm.size(); ++i) s += cost.at(i, perm[i]);
  return s;
}

Assignment linear_assignment_max(const Matrix& cost) {
  const size_t n = cost.rows();
  if (n == 0 || cost.cols() != n) {
    throw_validation("linear_assignment_max requires a square matrix, got " +
                     std::to_string(cost.rows()) + "x" +
                     std::to_string(cost.cols()));
  }
  cost.check_finite("assignment cost matrix");

  const double inf = std::numeric_limits<double>::infinity();
  // Minimize the negated costs; 1-based arrays with column 0 as the virtual
  // start of each augmenting path.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<size_t> match(n + 1, 0), way(n + 1, 0);

  for (size_t i = 1; i <= n; ++i) {
    match[0] = i;
    size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const size_t i0 = match[j0];
      double delta = inf;
      size_t j1 = 0;
      for (size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment result;
  result.perm.assign(n, 0);
  for (size_t j = 1; j <= n; ++j) result.perm[match[j] - 1] = j - 1;
  return result;
}

}  // namespace smoekit
