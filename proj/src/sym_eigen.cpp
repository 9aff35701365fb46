#include "sym_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "error.hpp"

namespace smoekit {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = i + 1; j < a.cols(); ++j) s += a.at(i, j) * a.at(i, j);
  return std::sqrt(2.0 * s);
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

EigenResult sym_eigen(const Matrix& a, size_t k) {
  const size_t n = a.rows();
  if (n == 0 || a.cols() != n) {
    throw_validation("sym_eigen requires a non-empty square matrix, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (std::fabs(a.at(i, j) - a.at(j, i)) > 1e-9) {
        throw_validation("sym_eigen requires a symmetric matrix (entry " +
                         std::to_string(i) + "," + std::to_string(j) +
                         " differs from its transpose)");
      }
    }
  }
  if (k < 1 || k > n) {
    throw_validation("sym_eigen: k must be in [1, " + std::to_string(n) +
                     "], got " + std::to_string(k));
  }

  Matrix w = a;
  // Enforce exact symmetry so rotations stay consistent.
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (w.at(i, j) + w.at(j, i));
      w.at(i, j) = m;
      w.at(j, i) = m;
    }

  Matrix v(n, n);
  for (size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  const double norm = frobenius_norm(w);
  const double stop = std::max(1e-13 * norm, 1e-300);
  const size_t max_sweeps = 128;

  size_t sweep = 0;
  while (off_diagonal_norm(w) > stop) {
    if (++sweep > max_sweeps) {
      throw Error(ErrorCategory::convergence,
                  "sym_eigen failed to converge for " + std::to_string(n) +
                      "x" + std::to_string(n) + " matrix after " +
                      std::to_string(max_sweeps) + " sweeps");
    }
    for (size_t p = 0; p + 1 < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        const double apq = w.at(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        const double theta = (w.at(q, q) - w.at(p, p)) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) /
            (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (size_t i = 0; i < n; ++i) {
          const double wip = w.at(i, p);
          const double wiq = w.at(i, q);
          w.at(i, p) = c * wip - s * wiq;
          w.at(i, q) = s * wip + c * wiq;
        }
        for (size_t j = 0; j < n; ++j) {
          const double wpj = w.at(p, j);
          const double wqj = w.at(q, j);
          w.at(p, j) = c * wpj - s * wqj;
          w.at(q, j) = s * wpj + c * wqj;
        }
        for (size_t i = 0; i < n; ++i) {
          const double vip = v.at(i, p);
          const double viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return w.at(x, x) < w.at(y, y);
  });

  EigenResult result;
  result.values.resize(k);
  result.vectors = Matrix(n, k);
  for (size_t j = 0; j < k; ++j) {
    const size_t src = order[j];
    result.values[j] = w.at(src, src);
    // Deterministic sign: largest-magnitude component made positive.
    size_t arg = 0;
    double best = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double m = std::fabs(v.at(i, src));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    const double sign = v.at(arg, src) < 0.0 ? -1.0 : 1.0;
    for (size_t i = 0; i < n; ++i) result.vectors.at(i, j) = sign * v.at(i, src);
  }
  return result;
}

}  // namespace smoekit
