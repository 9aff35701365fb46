#pragma once

#include <cstdint>
#include <string>

#include "config.hpp"

namespace smoekit {

// Exact integer parameter counts. `attention` includes the per-layer
// layernorms; `embedding` includes the final layernorm (the output head is
// tied to the token embedding and adds nothing).
struct ParamBreakdown {
  uint64_t embedding = 0;
  uint64_t attention = 0;
  uint64_t dense_ffn = 0;
  uint64_t experts = 0;
  uint64_t routers = 0;
  uint64_t total = 0;
};

ParamBreakdown param_count(const ModelConfig& config);

// FLOPs per token of a forward pass: ffn = N_l * 24 d^2,
// qkvo = N_l * 48 d^2, attention = N_l * 6 d (L+1), router = |moe| * 2 d M.
// `total_activated` counts only the top_k = 1 activated expert per MoE layer,
// so it is independent of the expert count; the router term is reported
// separately and excluded from the headline (its cost is negligible).
struct FlopsBreakdown {
  uint64_t ffn = 0;
  uint64_t qkvo = 0;
  uint64_t attention = 0;
  uint64_t router = 0;
  uint64_t total_activated = 0;
};

FlopsBreakdown flops_per_token(const ModelConfig& config);

std::string param_breakdown_json(const ParamBreakdown& b);
std::string flops_breakdown_json(const FlopsBreakdown& b);

}  // namespace smoekit
