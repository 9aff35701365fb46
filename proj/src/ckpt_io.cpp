#include "ckpt_io.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "bytes.hpp"
#include "config.hpp"

namespace smoekit {

namespace {

using nlohmann::json;

constexpr size_t kAlign = 64;

struct TensorSlot {
  std::string name;
  std::vector<uint64_t> shape;
  Vec* data;
};

// Fixed tensor enumeration order; both the writer and the loader walk this.
std::vector<TensorSlot> tensor_slots(SmoeCheckpoint& ckpt) {
  std::vector<TensorSlot> slots;
  auto add_mat = [&](std::string name, Matrix& m) {
    slots.push_back({std::move(name), {m.rows(), m.cols()}, &m.data()});
  };
  auto add_vec = [&](std::string name, Vec& v) {
    slots.push_back({std::move(name), {v.size()}, &v});
  };
  auto add_expert = [&](const std::string& prefix, ExpertWeights& e) {
    add_mat(prefix + ".w_in", e.w_in);
    add_vec(prefix + ".b_in", e.b_in);
    add_mat(prefix + ".w_out", e.w_out);
    add_vec(prefix + ".b_out", e.b_out);
  };

  add_mat("token_embedding", ckpt.token_embedding);
  add_mat("position_embedding", ckpt.position_embedding);
  for (size_t l = 0; l < ckpt.layers.size(); ++l) {
    auto& layer = ckpt.layers[l];
    const std::string p = "layers." + std::to_string(l);
    add_vec(p + ".ln1.gamma", layer.ln1.gamma);
    add_vec(p + ".ln1.beta", layer.ln1.beta);
    add_mat(p + ".attn.wq", layer.attn.wq);
    add_vec(p + ".attn.bq", layer.attn.bq);
    add_mat(p + ".attn.wk", layer.attn.wk);
    add_vec(p + ".attn.bk", layer.attn.bk);
    add_mat(p + ".attn.wv", layer.attn.wv);
    add_vec(p + ".attn.bv", layer.attn.bv);
    add_mat(p + ".attn.wo", layer.attn.wo);
    add_vec(p + ".attn.bo", layer.attn.bo);
    add_vec(p + ".ln2.gamma", layer.ln2.gamma);
    add_vec(p + ".ln2.beta", layer.ln2.beta);
    if (layer.ffn.is_moe) {
      add_mat(p + ".router.w", layer.ffn.router.w);
      for (size_t e = 0; e < layer.ffn.experts.size(); ++e) {
        add_expert(p + ".experts." + std::to_string(e), layer.ffn.experts[e]);
      }
    } else {
      add_expert(p + ".ffn", layer.ffn.dense);
    }
  }
  add_vec("ln_f.gamma", ckpt.ln_f.gamma);
  add_vec("ln_f.beta", ckpt.ln_f.beta);
  return slots;
}

uint64_t numel(const std::vector<uint64_t>& shape) {
  uint64_t n = 1;
  for (uint64_t s : shape) n *= s;
  return n;
}

// Empty checkpoint skeleton with the given per-MoE-layer expert counts (keyed
// by layer index), ready to be filled tensor by tensor.
SmoeCheckpoint make_skeleton(const ModelConfig& config,
                             const std::map<uint32_t, uint32_t>& experts_per_layer) {
  SmoeCheckpoint ckpt;
  ckpt.config = config;
  ckpt.token_embedding = Matrix(config.vocab_size, config.d_model);
  ckpt.position_embedding = Matrix(config.context_length, config.d_model);
  ckpt.layers.resize(config.n_layers);
  auto empty_expert = [&]() {
    ExpertWeights e;
    e.w_in = Matrix(config.d_ff, config.d_model);
    e.b_in = Vec(config.d_ff, 0.0);
    e.w_out = Matrix(config.d_model, config.d_ff);
    e.b_out = Vec(config.d_model, 0.0);
    return e;
  };
  for (uint32_t l = 0; l < config.n_layers; ++l) {
    auto& layer = ckpt.layers[l];
    layer.ln1 = {Vec(config.d_model, 0.0), Vec(config.d_model, 0.0)};
    layer.ln2 = layer.ln1;
    layer.attn.wq = Matrix(config.d_model, config.d_model);
    layer.attn.wk = layer.attn.wq;
    layer.attn.wv = layer.attn.wq;
    layer.attn.wo = layer.attn.wq;
    layer.attn.bq = Vec(config.d_model, 0.0);
    layer.attn.bk = layer.attn.bq;
    layer.attn.bv = layer.attn.bq;
    layer.attn.bo = layer.attn.bq;
    if (config.is_moe_layer(l)) {
      auto it = experts_per_layer.find(l);
      if (it == experts_per_layer.end()) {
        throw Error(ErrorCategory::format,
                    "checkpoint header missing router for moe layer " +
                        std::to_string(l));
      }
      layer.ffn.is_moe = true;
      layer.ffn.router.w = Matrix(config.d_model, it->second);
      for (uint32_t e = 0; e < it->second; ++e) {
        layer.ffn.experts.push_back(empty_expert());
      }
    } else {
      layer.ffn.dense = empty_expert();
    }
  }
  ckpt.ln_f = {Vec(config.d_model, 0.0), Vec(config.d_model, 0.0)};
  return ckpt;
}

}  // namespace

SerializedCheckpoint serialize_checkpoint(const SmoeCheckpoint& ckpt) {
  ckpt.validate();
  // The slot walk only reads; tensor_slots needs a mutable ref so the loader
  // can reuse it for filling.
  auto slots = tensor_slots(const_cast<SmoeCheckpoint&>(ckpt));

  json directory = json::array();
  uint64_t offset = 0;
  for (const auto& slot : slots) {
    const uint64_t length = numel(slot.shape) * 4;
    directory.push_back({{"name", slot.name},
                         {"shape", slot.shape},
                         {"dtype", "f32"},
                         {"offset", offset},
                         {"length", length}});
    offset = (offset + length + kAlign - 1) / kAlign * kAlign;
  }

  json header;
  header["config"] = json::parse(config_to_json(ckpt.config));
  header["tensors"] = directory;
  const std::string header_text = header.dump();

  ByteWriter w;
  w.raw("SMOE", 4);
  w.u32(kCheckpointVersion);
  w.u64(header_text.size());
  w.raw(header_text.data(), header_text.size());
  w.pad_to(kAlign);
  for (const auto& slot : slots) {
    for (double v : *slot.data) w.f32(static_cast<float>(v));
    w.pad_to(kAlign);
  }

  SerializedCheckpoint out;
  out.digest = sha256(w.bytes());
  w.raw(out.digest.data(), out.digest.size());
  out.bytes = std::move(w.bytes());
  return out;
}

Digest checkpoint_digest(const SmoeCheckpoint& ckpt) {
  return serialize_checkpoint(ckpt).digest;
}

Digest save_checkpoint(const SmoeCheckpoint& ckpt, const std::string& path) {
  SerializedCheckpoint s = serialize_checkpoint(ckpt);
  write_file(path, s.bytes);
  return s.digest;
}

SmoeCheckpoint load_checkpoint(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  ByteReader r(bytes);

  const auto magic = r.raw(4, "magic");
  if (std::memcmp(magic.data(), "SMOE", 4) != 0) {
    throw Error(ErrorCategory::format, path + " is not a checkpoint (bad magic)");
  }
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw Error(ErrorCategory::version,
                path + " has unsupported checkpoint version " +
                    std::to_string(version));
  }
  const uint64_t header_len = r.u64("header length");
  const auto header_bytes = r.raw(header_len, "header");

  json header;
  try {
    header = json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::format,
                path + ": checkpoint header is not valid JSON: " + e.what());
  }
  if (!header.contains("config") || !header.contains("tensors")) {
    throw Error(ErrorCategory::format, path + ": incomplete checkpoint header");
  }
  const ModelConfig config = config_from_json(header["config"].dump());

  const size_t payload_start = (r.pos() + kAlign - 1) / kAlign * kAlign;
  if (bytes.size() < payload_start + 32) {
    throw Error(ErrorCategory::format, path + ": file out of bounds (truncated payload)");
  }
  const size_t payload_size = bytes.size() - 32 - payload_start;

  struct Entry {
    std::vector<uint64_t> shape;
    uint64_t offset;
    uint64_t length;
  };
  std::map<std::string, Entry> entries;
  std::vector<std::pair<uint64_t, uint64_t>> spans;
  std::map<uint32_t, uint32_t> experts_per_layer;
  for (const auto& t : header["tensors"]) {
    Entry e;
    e.shape = t.at("shape").get<std::vector<uint64_t>>();
    e.offset = t.at("offset").get<uint64_t>();
    e.length = t.at("length").get<uint64_t>();
    const std::string name = t.at("name").get<std::string>();
    const std::string dtype = t.at("dtype").get<std::string>();
    if (dtype != "f32") {
      throw Error(ErrorCategory::format,
                  path + ": unsupported dtype \"" + dtype + "\" for " + name);
    }
    uint64_t elements = 1;
    for (uint64_t s : e.shape) {
      if (s != 0 && elements > payload_size / s) {
        throw Error(ErrorCategory::format,
                    path + ": tensor " + name + " out of file bounds");
      }
      elements *= s;
    }
    if (e.length != elements * 4) {
      throw Error(ErrorCategory::format,
                  path + ": directory length mismatch for " + name);
    }
    // overflow-safe bounds check
    if (e.length > payload_size || e.offset > payload_size - e.length) {
      throw Error(ErrorCategory::format,
                  path + ": tensor " + name + " out of file bounds");
    }
    spans.emplace_back(e.offset, e.length);
    if (!entries.emplace(name, std::move(e)).second) {
      throw Error(ErrorCategory::format, path + ": duplicate tensor " + name);
    }
    // Per-layer expert counts come from the router shapes.
    if (name.starts_with("layers.") && name.ends_with(".router.w")) {
      uint32_t l = 0;
      try {
        l = std::stoul(name.substr(7));
      } catch (const std::exception&) {
        throw Error(ErrorCategory::format,
                    path + ": malformed tensor name " + name);
      }
      experts_per_layer[l] =
          static_cast<uint32_t>(entries[name].shape.at(1));
    }
  }
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].first + spans[i - 1].second) {
      throw Error(ErrorCategory::format, path + ": overlapping tensor sections");
    }
  }

  // Directory bounds are validated above; now verify the content digest
  // before trusting any payload bytes.
  const Digest expect = sha256({bytes.data(), bytes.size() - 32});
  if (std::memcmp(expect.data(), bytes.data() + bytes.size() - 32, 32) != 0) {
    throw Error(ErrorCategory::digest,
                path + ": content digest mismatch (file is corrupt)");
  }

  SmoeCheckpoint ckpt = make_skeleton(config, experts_per_layer);
  auto slots = tensor_slots(ckpt);
  size_t consumed = 0;
  for (auto& slot : slots) {
    auto it = entries.find(slot.name);
    if (it == entries.end()) {
      throw Error(ErrorCategory::format, path + ": missing tensor " + slot.name);
    }
    const Entry& e = it->second;
    if (e.shape != slot.shape) {
      throw Error(ErrorCategory::format,
                  path + ": shape mismatch for tensor " + slot.name);
    }
    ByteReader tr(
        {bytes.data() + payload_start + e.offset, static_cast<size_t>(e.length)});
    Vec& dst = *slot.data;
    for (size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<double>(tr.f32(slot.name.c_str()));
    }
    ++consumed;
  }
  if (consumed != entries.size()) {
    throw Error(ErrorCategory::format,
                path + ": checkpoint contains unexpected extra tensors");
  }

  ckpt.validate();
  return ckpt;
}

}  // namespace smoekit
