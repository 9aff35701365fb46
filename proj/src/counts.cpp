#include "counts.hpp"

#include <json.hpp>

namespace smoekit {

ParamBreakdown param_count(const ModelConfig& config) {
  config.validate();
  const uint64_t d = config.d_model;
  const uint64_t d_ff = config.d_ff;
  const uint64_t layers = config.n_layers;
  const uint64_t moe_layers = config.n_moe_layers();
  const uint64_t dense_layers = layers - moe_layers;
  const uint64_t m = config.n_experts;

  const uint64_t ffn_params = 2 * d * d_ff + d_ff + d;  // w_in,b_in,w_out,b_out
  const uint64_t layernorm_params = 2 * d;

  ParamBreakdown b;
  b.embedding = static_cast<uint64_t>(config.vocab_size) * d +
                static_cast<uint64_t>(config.context_length) * d +
                layernorm_params;  // final layernorm
  b.attention = layers * (4 * (d * d + d) + 2 * layernorm_params);
  b.dense_ffn = dense_layers * ffn_params;
  b.experts = moe_layers * m * ffn_params;
  b.routers = moe_layers * d * m;
  b.total = b.embedding + b.attention + b.dense_ffn + b.experts + b.routers;
  return b;
}

FlopsBreakdown flops_per_token(const ModelConfig& config) {
  config.validate();
  const uint64_t d = config.d_model;
  const uint64_t layers = config.n_layers;
  const uint64_t context = config.context_length;

  FlopsBreakdown b;
  b.ffn = layers * 24 * d * d;
  b.qkvo = layers * 48 * d * d;
  b.attention = layers * 6 * d * (context + 1);
  b.router = config.n_moe_layers() * 2 * d * config.n_experts;
  b.total_activated = b.ffn + b.qkvo + b.attention;
  return b;
}

std::string param_breakdown_json(const ParamBreakdown& b) {
  nlohmann::json j;
  j["embedding"] = b.embedding;
  j["attention"] = b.attention;
  j["dense_ffn"] = b.dense_ffn;
  j["experts"] = b.experts;
  j["routers"] = b.routers;
  j["total"] = b.total;
  return j.dump();
}

std::string flops_breakdown_json(const FlopsBreakdown& b) {
  nlohmann::json j;
  j["ffn"] = b.ffn;
  j["qkvo"] = b.qkvo;
  j["attention"] = b.attention;
  j["router"] = b.router;
  j["total_activated"] = b.total_activated;
  return j.dump();
}

}  // namespace smoekit
