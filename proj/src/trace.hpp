#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "digest.hpp"

namespace smoekit {

// Per-layer router evidence harvested from a token stream. Logits are kept in
// their storage precision (f32) so an in-memory trace and one reloaded from
// disk drive reductions identically; selection counts record tokens actually
// dispatched, so counts + drops == n_positions.
struct TraceLayer {
  uint32_t layer_id = 0;
  uint32_t z = 0;
  std::vector<float> logits;  // n_positions rows of z values, row-major
  std::vector<uint64_t> selection_counts;
  uint64_t dropped = 0;
};

struct RouterTrace {
  Digest model_hash{};
  uint64_t n_positions = 0;
  std::vector<TraceLayer> layers;

  const TraceLayer& layer(uint32_t layer_id) const;
  bool has_layer(uint32_t layer_id) const;
};

inline constexpr uint32_t kTraceVersion = 1;

// Runs eval-mode forward passes over the stream (consumed in sequential
// windows, wrapping around when exhausted) until exactly max_positions token
// positions are traced; the final pass is truncated position-wise if needed.
RouterTrace harvest(const SmoeCheckpoint& ckpt,
                    const std::vector<uint32_t>& stream, size_t batch,
                    size_t seq, uint64_t max_positions);

inline constexpr uint64_t kDefaultMaxPositions = 65536;

struct FrequencyResult {
  Vec frequencies;        // sums to 1
  bool degenerate = false;  // every selection was dropped; uniform returned
};

FrequencyResult frequencies(const RouterTrace& trace, uint32_t layer_id);

void save_trace(const RouterTrace& trace, const std::string& path);
RouterTrace load_trace(const std::string& path);

}  // namespace smoekit
