#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace smoekit {

// Architecture hyper-parameters of the toy decoder. Defaults that are not
// given explicitly in a config document: d_ff = 4 * d_model, top_k = 1,
// moe_layer_indices = every alternate FFN layer starting with layer 0,
// alpha = 0.01, train_capacity_factor = 1.2, eval_capacity_factor = 1.0,
// min_expert_capacity = 4.
struct ModelConfig {
  uint32_t d_model = 0;
  uint32_t d_ff = 0;
  uint32_t n_heads = 0;
  uint32_t n_layers = 0;
  uint32_t n_experts = 0;
  uint32_t top_k = 1;
  uint32_t vocab_size = 0;
  uint32_t context_length = 0;
  std::vector<uint32_t> moe_layer_indices;
  double alpha = 0.01;
  double train_capacity_factor = 1.2;
  double eval_capacity_factor = 1.0;
  uint32_t min_expert_capacity = 4;

  bool is_moe_layer(uint32_t layer) const;
  size_t n_moe_layers() const { return moe_layer_indices.size(); }

  // Throws a validation error on inconsistent fields.
  void validate() const;
};

// Parses a JSON config document. Unknown keys are rejected; missing optional
// keys take the defaults above.
ModelConfig config_from_json(const std::string& json_text);

std::string config_to_json(const ModelConfig& config);

}  // namespace smoekit
