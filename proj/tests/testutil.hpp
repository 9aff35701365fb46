#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "forward.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace testutil {

using namespace smoekit;

inline Matrix random_matrix(size_t rows, size_t cols, Rng& rng,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.next_gaussian();
  return m;
}

inline Matrix random_symmetric(size_t n, Rng& rng) {
  Matrix m(n, n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      const double v = rng.next_gaussian();
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
  return m;
}

inline ModelConfig tiny_config(uint32_t n_experts = 4, uint32_t d_model = 16,
                               uint32_t n_layers = 2, uint32_t vocab = 64,
                               uint32_t context = 32) {
  ModelConfig c;
  c.d_model = d_model;
  c.d_ff = 4 * d_model;
  c.n_heads = 2;
  c.n_layers = n_layers;
  c.n_experts = n_experts;
  c.vocab_size = vocab;
  c.context_length = context;
  for (uint32_t i = 0; i < n_layers; i += 2) c.moe_layer_indices.push_back(i);
  return c;
}

inline std::vector<uint32_t> random_tokens(size_t n, uint32_t vocab, Rng& rng) {
  std::vector<uint32_t> ids(n);
  for (auto& id : ids) id = static_cast<uint32_t>(rng.next_below(vocab));
  return ids;
}

inline ExpertWeights random_expert(uint32_t d_model, uint32_t d_ff, Rng& rng) {
  ExpertWeights e;
  e.w_in = random_matrix(d_ff, d_model, rng, 0.3);
  e.b_in = Vec(d_ff);
  for (auto& v : e.b_in) v = 0.3 * rng.next_gaussian();
  e.w_out = random_matrix(d_model, d_ff, rng, 0.3);
  e.b_out = Vec(d_model);
  for (auto& v : e.b_out) v = 0.3 * rng.next_gaussian();
  return e;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return max_abs_diff(a.data(), b.data());
}

// Chance-corrected agreement between two labelings; 1.0 = identical partition.
inline double adjusted_rand_index(const std::vector<uint32_t>& a,
                                  const std::vector<uint32_t>& b) {
  const size_t n = a.size();
  const uint32_t ka = *std::max_element(a.begin(), a.end()) + 1;
  const uint32_t kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<uint64_t>> table(ka, std::vector<uint64_t>(kb, 0));
  for (size_t i = 0; i < n; ++i) ++table[a[i]][b[i]];
  auto choose2 = [](uint64_t x) { return static_cast<double>(x) * (x - 1) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  std::vector<uint64_t> rows(ka, 0), cols(kb, 0);
  for (uint32_t i = 0; i < ka; ++i) {
    for (uint32_t j = 0; j < kb; ++j) {
      sum_ij += choose2(table[i][j]);
      rows[i] += table[i][j];
      cols[j] += table[i][j];
    }
  }
  for (uint64_t r : rows) sum_a += choose2(r);
  for (uint64_t c : cols) sum_b += choose2(c);
  const double total = choose2(n);
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

// Exhaustive max-assignment oracle over all n! permutations.
inline double brute_force_assignment_max(const Matrix& cost) {
  std::vector<size_t> perm(cost.rows());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  double best = -1e300;
  do {
    double v = 0.0;
    for (size_t i = 0; i < perm.size(); ++i) v += cost.at(i, perm[i]);
    best = std::max(best, v);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Unique scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& tag) {
  static uint64_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("smoekit_test_" + tag + "_" + std::to_string(::getpid()) +
                    "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testutil
