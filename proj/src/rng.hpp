#pragma once

#include <cstdint>

namespace smoekit {

// Deterministic pseudo-random generator used for every stochastic step in the
// toolkit (weight init, k-means++ seeding, router reinitialization).
//
// Algorithm: xoshiro256++ (Blackman & Vigna), state seeded with splitmix64.
// The generator is fixed so that a seed reproduces the same checkpoint bytes
// on any platform. Gaussians come from the trigonometric Box-Muller transform,
// which consumes exactly two uniforms per pair of normals.
//
// A single Rng instance must not be shared across concurrent callers.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double();

  // Uniform integer in [0, n). n must be >= 1.
  uint64_t next_below(uint64_t n);

  // Standard normal N(0, 1).
  double next_gaussian();

 private:
  uint64_t state_[4];
  double spare_gaussian_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent seed for a named sub-stream, so one user-facing seed
// can drive several stages (planning, router reinit, ...) without the streams
// overlapping.
uint64_t derive_seed(uint64_t seed, uint64_t stream);

}  // namespace smoekit
