#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "checkpoint.hpp"
#include "matrix.hpp"

namespace smoekit {

enum class ForwardMode { train, eval };

// Per-MoE-layer routing evidence from one forward pass. `selected` records the
// argmax expert for every token (ties -> lowest index) regardless of capacity;
// `dispatch_counts` count only tokens actually processed, so
// sum(dispatch_counts) + dropped_count == token count.
struct MoeLayerStats {
  uint32_t layer_id = 0;
  Matrix logits;                          // tokens x M, pre-softmax
  std::vector<uint32_t> selected;         // argmax expert per token
  std::vector<uint8_t> dropped;           // 1 if the token exceeded capacity
  std::vector<uint64_t> dispatch_counts;  // per expert, excludes dropped
  uint64_t dropped_count = 0;
  Vec gate_sums;  // per expert, sum of gate probabilities over tokens
};

struct ForwardStats {
  std::vector<MoeLayerStats> moe_layers;
  double load_balance_loss = 0.0;
  double mean_nll = 0.0;  // filled by evaluate_nll; 0 otherwise
};

struct ForwardResult {
  Matrix logits;  // (batch*seq) x vocab, row order = arrival order
  ForwardStats stats;
};

// softmax(router.w^T x) with max-subtraction; entries sum to 1 within 1e-12.
Vec gate_values(const RouterWeights& router, std::span<const double> x);

// x -> w_out * gelu(w_in * x + b_in) + b_out.
Vec expert_apply(const ExpertWeights& e, std::span<const double> x);

// Top-1 MoE layer over a flattened batch of token vectors (rows of xs, in
// arrival order). Expert capacity is max(min_capacity,
// ceil(capacity_factor * tokens / M)); overflow tokens are dropped in arrival
// order and contribute a zero output to the residual stream. The selected
// expert's output is scaled by its gate value.
std::pair<Matrix, MoeLayerStats> moe_layer_forward(const FfnBlock& block,
                                                   const Matrix& xs,
                                                   double capacity_factor,
                                                   uint32_t min_capacity);

// Pre-norm causal decoder forward pass over `batch` sequences of length `seq`
// (token_ids holds batch*seq ids, row-major). Deterministic.
ForwardResult model_forward(const SmoeCheckpoint& ckpt,
                            std::span<const uint32_t> token_ids, size_t batch,
                            size_t seq, ForwardMode mode);

// alpha * sum_i f_i P_i per MoE layer, summed over layers. f_i is the argmax
// dispatch fraction (drops included), P_i the mean gate probability.
double load_balance_loss(const ForwardStats& stats, double alpha);

// Mean next-token cross-entropy over non-overlapping windows of seq+1 tokens,
// eval-mode capacity.
double evaluate_nll(const SmoeCheckpoint& ckpt,
                    std::span<const uint32_t> stream, size_t batch, size_t seq);

}  // namespace smoekit
