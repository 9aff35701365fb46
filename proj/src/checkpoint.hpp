#pragma once

#include <cstdint>
#include <vector>

#include "config.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace smoekit {

struct LayerNormParams {
  Vec gamma;
  Vec beta;
};

struct AttentionWeights {
  Matrix wq, wk, wv, wo;  // each d_model x d_model, column-vector convention
  Vec bq, bk, bv, bo;
};

// Two-layer feedforward expert: x -> w_out * gelu(w_in * x + b_in) + b_out.
struct ExpertWeights {
  Matrix w_in;   // d_ff x d_model
  Vec b_in;      // d_ff
  Matrix w_out;  // d_model x d_ff
  Vec b_out;     // d_model
};

struct RouterWeights {
  Matrix w;  // d_model x M; logits = w^T x
};

// Either a dense FFN or an MoE bank with a router. MoE layers may carry a
// per-layer expert count different from config.n_experts after reductions
// whose per-layer budgets vary.
struct FfnBlock {
  bool is_moe = false;
  ExpertWeights dense;
  RouterWeights router;
  std::vector<ExpertWeights> experts;
};

struct TransformerLayer {
  LayerNormParams ln1;
  AttentionWeights attn;
  LayerNormParams ln2;
  FfnBlock ffn;
};

// Full model weights. The output head is tied to the token embedding.
struct SmoeCheckpoint {
  ModelConfig config;
  Matrix token_embedding;     // vocab x d_model
  Matrix position_embedding;  // context x d_model
  std::vector<TransformerLayer> layers;
  LayerNormParams ln_f;

  // Structural consistency with the config (layer layout, tensor shapes).
  void validate() const;
};

// Random model: weight matrices drawn N(0, 0.02^2), biases zero, layernorm
// gamma = 1 / beta = 0. The draw order is fixed, so a seed determines the
// checkpoint bytes.
SmoeCheckpoint init_random(const ModelConfig& config, Rng& rng);

struct PlantedModel {
  SmoeCheckpoint checkpoint;
  // Ground-truth group id per expert, one vector per MoE layer in layer order.
  std::vector<std::vector<uint32_t>> labels;
};

// Planted model for clustering oracles: each MoE layer holds n_groups base
// experts; group members are hidden-unit permutations of their base plus
// N(0, noise_std^2) noise, and router columns within a group share a base
// column plus the same noise. Groups are contiguous index blocks.
PlantedModel init_planted(const ModelConfig& config, uint32_t n_groups,
                          double noise_std, Rng& rng);

// Applies a hidden-unit permutation: unit i of the result is unit perm[i] of
// the input. Function-preserving by construction.
ExpertWeights permute_expert(const ExpertWeights& e,
                             const std::vector<size_t>& perm);

}  // namespace smoekit
