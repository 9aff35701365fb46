#include "config.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "error.hpp"

namespace smoekit {

using nlohmann::json;

bool ModelConfig::is_moe_layer(uint32_t layer) const {
  return std::find(moe_layer_indices.begin(), moe_layer_indices.end(), layer) !=
         moe_layer_indices.end();
}

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || vocab_size == 0 ||
      context_length == 0 || d_ff == 0) {
    throw_validation("config: dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw_validation("config: d_model (" + std::to_string(d_model) +
                     ") must be divisible by n_heads (" +
                     std::to_string(n_heads) + ")");
  }
  if (n_experts < 1) throw_validation("config: n_experts must be >= 1");
  if (top_k != 1) {
    throw_validation("config: only top_k = 1 routing is supported, got " +
                     std::to_string(top_k));
  }
  std::set<uint32_t> seen;
  for (uint32_t idx : moe_layer_indices) {
    if (idx >= n_layers) {
      throw_validation("config: moe layer index " + std::to_string(idx) +
                       " out of range for " + std::to_string(n_layers) +
                       " layers");
    }
    if (!seen.insert(idx).second) {
      throw_validation("config: duplicate moe layer index " +
                       std::to_string(idx));
    }
  }
  if (train_capacity_factor <= 0.0 || eval_capacity_factor <= 0.0) {
    throw_validation("config: capacity factors must be positive");
  }
  if (alpha < 0.0) throw_validation("config: alpha must be non-negative");
}

ModelConfig config_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::format,
                std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw_validation("config must be a JSON object");

  static const std::set<std::string> known = {
      "d_model",        "d_ff",
      "n_heads",        "n_layers",
      "n_experts",      "top_k",
      "vocab_size",     "context_length",
      "moe_layer_indices", "alpha",
      "train_capacity_factor", "eval_capacity_factor",
      "min_expert_capacity"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known.count(it.key())) {
      throw_validation("config: unknown field \"" + it.key() + "\"");
    }
  }

  auto require_uint = [&](const char* key) -> uint32_t {
    if (!doc.contains(key)) {
      throw_validation(std::string("config: missing field \"") + key + "\"");
    }
    if (!doc[key].is_number_unsigned()) {
      throw_validation(std::string("config: field \"") + key +
                       "\" must be a non-negative integer");
    }
    return doc[key].get<uint32_t>();
  };

  ModelConfig c;
  try {
    c.d_model = require_uint("d_model");
    c.n_heads = require_uint("n_heads");
    c.n_layers = require_uint("n_layers");
    c.n_experts = require_uint("n_experts");
    c.vocab_size = require_uint("vocab_size");
    c.context_length = require_uint("context_length");
    c.d_ff = doc.contains("d_ff") ? doc["d_ff"].get<uint32_t>() : 4 * c.d_model;
    c.top_k = doc.contains("top_k") ? doc["top_k"].get<uint32_t>() : 1;
    if (doc.contains("moe_layer_indices")) {
      c.moe_layer_indices =
          doc["moe_layer_indices"].get<std::vector<uint32_t>>();
      std::sort(c.moe_layer_indices.begin(), c.moe_layer_indices.end());
    } else {
      for (uint32_t i = 0; i < c.n_layers; i += 2)
        c.moe_layer_indices.push_back(i);
    }
    if (doc.contains("alpha")) c.alpha = doc["alpha"].get<double>();
    if (doc.contains("train_capacity_factor"))
      c.train_capacity_factor = doc["train_capacity_factor"].get<double>();
    if (doc.contains("eval_capacity_factor"))
      c.eval_capacity_factor = doc["eval_capacity_factor"].get<double>();
    if (doc.contains("min_expert_capacity"))
      c.min_expert_capacity = doc["min_expert_capacity"].get<uint32_t>();
  } catch (const json::exception& e) {
    throw_validation(std::string("config: mistyped field: ") + e.what());
  }

  c.validate();
  return c;
}

std::string config_to_json(const ModelConfig& config) {
  json doc;
  doc["d_model"] = config.d_model;
  doc["d_ff"] = config.d_ff;
  doc["n_heads"] = config.n_heads;
  doc["n_layers"] = config.n_layers;
  doc["n_experts"] = config.n_experts;
  doc["top_k"] = config.top_k;
  doc["vocab_size"] = config.vocab_size;
  doc["context_length"] = config.context_length;
  doc["moe_layer_indices"] = config.moe_layer_indices;
  doc["alpha"] = config.alpha;
  doc["train_capacity_factor"] = config.train_capacity_factor;
  doc["eval_capacity_factor"] = config.eval_capacity_factor;
  doc["min_expert_capacity"] = config.min_expert_capacity;
  return doc.dump();
}

}  // namespace smoekit
