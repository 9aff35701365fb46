#include "trace.hpp"

#include <cstring>

#include "bytes.hpp"
#include "ckpt_io.hpp"
#include "forward.hpp"

namespace smoekit {

const TraceLayer& RouterTrace::layer(uint32_t layer_id) const {
  for (const auto& l : layers) {
    if (l.layer_id == layer_id) return l;
  }
  throw_validation("trace has no moe layer " + std::to_string(layer_id));
}

bool RouterTrace::has_layer(uint32_t layer_id) const {
  for (const auto& l : layers) {
    if (l.layer_id == layer_id) return true;
  }
  return false;
}

RouterTrace harvest(const SmoeCheckpoint& ckpt,
                    const std::vector<uint32_t>& stream, size_t batch,
                    size_t seq, uint64_t max_positions) {
  if (stream.empty()) throw_validation("harvest: token stream is empty");
  if (batch < 1 || seq < 1) throw_validation("harvest: batch and seq must be >= 1");
  if (max_positions < seq) {
    throw_validation("harvest: max_positions (" + std::to_string(max_positions) +
                     ") must be >= seq (" + std::to_string(seq) + ")");
  }

  RouterTrace trace;
  trace.model_hash = checkpoint_digest(ckpt);
  trace.n_positions = max_positions;
  for (uint32_t l : ckpt.config.moe_layer_indices) {
    TraceLayer layer;
    layer.layer_id = l;
    layer.z = static_cast<uint32_t>(ckpt.layers[l].ffn.experts.size());
    layer.logits.reserve(max_positions * layer.z);
    layer.selection_counts.assign(layer.z, 0);
    trace.layers.push_back(std::move(layer));
  }

  const size_t per_pass = batch * seq;
  std::vector<uint32_t> ids(per_pass);
  size_t cursor = 0;
  uint64_t traced = 0;
  while (traced < max_positions) {
    for (size_t i = 0; i < per_pass; ++i) {
      ids[i] = stream[(cursor + i) % stream.size()];
    }
    cursor = (cursor + per_pass) % stream.size();

    ForwardResult fr = model_forward(ckpt, ids, batch, seq, ForwardMode::eval);
    const uint64_t take = std::min<uint64_t>(per_pass, max_positions - traced);
    for (size_t li = 0; li < trace.layers.size(); ++li) {
      auto& dst = trace.layers[li];
      const auto& src = fr.stats.moe_layers[li];
      for (uint64_t t = 0; t < take; ++t) {
        for (uint32_t j = 0; j < dst.z; ++j) {
          dst.logits.push_back(static_cast<float>(src.logits.at(t, j)));
        }
        if (src.dropped[t]) {
          ++dst.dropped;
        } else {
          ++dst.selection_counts[src.selected[t]];
        }
      }
    }
    traced += take;
  }
  return trace;
}

FrequencyResult frequencies(const RouterTrace& trace, uint32_t layer_id) {
  const TraceLayer& layer = trace.layer(layer_id);
  uint64_t total = 0;
  for (uint64_t c : layer.selection_counts) total += c;
  FrequencyResult out;
  out.frequencies.resize(layer.z);
  if (total == 0) {
    out.degenerate = true;
    for (auto& f : out.frequencies) f = 1.0 / static_cast<double>(layer.z);
    return out;
  }
  for (uint32_t j = 0; j < layer.z; ++j) {
    out.frequencies[j] = static_cast<double>(layer.selection_counts[j]) /
                         static_cast<double>(total);
  }
  return out;
}

void save_trace(const RouterTrace& trace, const std::string& path) {
  ByteWriter w;
  w.raw("SMTR", 4);
  w.u32(kTraceVersion);
  w.raw(trace.model_hash.data(), trace.model_hash.size());
  w.u32(static_cast<uint32_t>(trace.layers.size()));
  for (const auto& layer : trace.layers) {
    w.u32(layer.layer_id);
    w.u32(layer.z);
    w.u64(trace.n_positions);
    for (float v : layer.logits) w.f32(v);
    for (uint64_t c : layer.selection_counts) w.u64(c);
    w.u64(layer.dropped);
  }
  write_file(path, w.bytes());
}

RouterTrace load_trace(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  ByteReader r(bytes);
  const auto magic = r.raw(4, "magic");
  if (std::memcmp(magic.data(), "SMTR", 4) != 0) {
    throw Error(ErrorCategory::format, path + " is not a trace (bad magic)");
  }
  const uint32_t version = r.u32("version");
  if (version != kTraceVersion) {
    throw Error(ErrorCategory::version,
                path + " has unsupported trace version " + std::to_string(version));
  }
  RouterTrace trace;
  const auto hash = r.raw(32, "model hash");
  std::memcpy(trace.model_hash.data(), hash.data(), 32);
  const uint32_t n_layers = r.u32("layer count");
  for (uint32_t li = 0; li < n_layers; ++li) {
    TraceLayer layer;
    layer.layer_id = r.u32("layer id");
    layer.z = r.u32("expert count");
    if (layer.z == 0) {
      throw Error(ErrorCategory::format, path + ": trace layer with zero experts");
    }
    const uint64_t n_positions = r.u64("position count");
    if (li == 0) {
      trace.n_positions = n_positions;
    } else if (n_positions != trace.n_positions) {
      throw Error(ErrorCategory::format,
                  path + ": inconsistent position counts across layers");
    }
    // overflow-safe size check before any allocation
    if (layer.z != 0 && n_positions > r.remaining() / 4 / layer.z) {
      throw Error(ErrorCategory::format,
                  path + ": file out of bounds reading logits");
    }
    layer.logits.resize(n_positions * layer.z);
    for (auto& v : layer.logits) v = r.f32("logits");
    layer.selection_counts.resize(layer.z);
    uint64_t total = 0;
    for (auto& c : layer.selection_counts) {
      c = r.u64("selection counts");
      total += c;
    }
    layer.dropped = r.u64("drop count");
    if (total + layer.dropped != n_positions) {
      throw Error(ErrorCategory::format,
                  path + ": selection counts + drops do not equal positions in layer " +
                      std::to_string(layer.layer_id));
    }
    trace.layers.push_back(std::move(layer));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCategory::format, path + ": trailing bytes after trace data");
  }
  return trace;
}

}  // namespace smoekit
