#pragma once

#include <cstdint>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace smoekit {

// Lloyd's k-means with k-means++ seeding drawn from `rng`. Distance ties are
// broken by the lowest index (rows for seeding, cluster ids for assignment) so
// a seed fully determines the labeling. Clusters that empty out are repaired
// by reseeding from the point farthest from its assigned centroid. Iteration
// stops when labels no longer change or after max_iters.
std::vector<uint32_t> kmeans(const Matrix& points, size_t k, Rng& rng,
                             size_t max_iters = 100);

}  // namespace smoekit
