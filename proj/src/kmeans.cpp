#include "kmeans.hpp"

#include <limits>
#include <string>

#include "error.hpp"

namespace smoekit {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<uint32_t> kmeans(const Matrix& points, size_t k, Rng& rng,
                             size_t max_iters) {
  const size_t n = points.rows();
  const size_t dim = points.cols();
  if (k < 1) throw_validation("kmeans: k must be >= 1");
  if (k > n) {
    throw_validation("kmeans: k = " + std::to_string(k) +
                     " exceeds number of points " + std::to_string(n));
  }
  if (max_iters < 1) throw_validation("kmeans: max_iters must be >= 1");

  // k-means++ seeding.
  Matrix centers(k, dim);
  std::vector<bool> is_center(n, false);
  size_t first = static_cast<size_t>(rng.next_below(n));
  for (size_t d = 0; d < dim; ++d) centers.at(0, d) = points.at(first, d);
  is_center[first] = true;

  Vec weight(n);
  for (size_t i = 0; i < n; ++i)
    weight[i] = sq_dist(points.row(i), centers.row(0));

  for (size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double w : weight) total += w;
    size_t pick = n;
    if (total > 0.0) {
      const double r = rng.next_double() * total;
      double cum = 0.0;
      for (size_t i = 0; i < n; ++i) {
        cum += weight[i];
        if (cum > r && weight[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // numerical tail: last point with positive weight
        for (size_t i = n; i-- > 0;) {
          if (weight[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    if (pick == n) {  // all remaining points coincide with chosen centers
      for (size_t i = 0; i < n; ++i) {
        if (!is_center[i]) {
          pick = i;
          break;
        }
      }
    }
    is_center[pick] = true;
    for (size_t d = 0; d < dim; ++d) centers.at(c, d) = points.at(pick, d);
    for (size_t i = 0; i < n; ++i)
      weight[i] = std::min(weight[i], sq_dist(points.row(i), centers.row(c)));
  }

  std::vector<uint32_t> labels(n, 0);
  std::vector<uint32_t> prev;
  std::vector<size_t> counts(k, 0);

  for (size_t iter = 0; iter < max_iters; ++iter) {
    // Assignment; ties go to the lowest cluster id.
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      uint32_t arg = 0;
      for (size_t c = 0; c < k; ++c) {
        const double d = sq_dist(points.row(i), centers.row(c));
        if (d < best) {
          best = d;
          arg = static_cast<uint32_t>(c);
        }
      }
      labels[i] = arg;
    }

    // Repair empty clusters from the farthest point of a non-singleton
    // cluster (ties -> lowest row index).
    counts.assign(k, 0);
    for (uint32_t l : labels) ++counts[l];
    for (size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      double far = -1.0;
      size_t pick = n;
      for (size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] < 2) continue;
        const double d = sq_dist(points.row(i), centers.row(labels[i]));
        if (d > far) {
          far = d;
          pick = i;
        }
      }
      if (pick == n) {
        throw Error(ErrorCategory::internal,
                    "kmeans: unable to repair empty cluster " +
                        std::to_string(c));
      }
      --counts[labels[pick]];
      labels[pick] = static_cast<uint32_t>(c);
      ++counts[c];
      for (size_t d = 0; d < dim; ++d) centers.at(c, d) = points.at(pick, d);
    }

    if (labels == prev) break;
    prev = labels;

    // Centroid update.
    Matrix sums(k, dim);
    counts.assign(k, 0);
    for (size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (size_t d = 0; d < dim; ++d) sums.at(labels[i], d) += points.at(i, d);
    }
    for (size_t c = 0; c < k; ++c) {
      for (size_t d = 0; d < dim; ++d)
        centers.at(c, d) = sums.at(c, d) / static_cast<double>(counts[c]);
    }
  }

  return labels;
}

}  // namespace smoekit
