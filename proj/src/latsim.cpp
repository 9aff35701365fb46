#include "latsim.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "error.hpp"

namespace smoekit {

using nlohmann::json;

void LatencyParams::validate(const ModelConfig& config) const {
  if (n_gpus < 1 || expert_parallel_degree < 1 || batch_per_gpu < 1 ||
      seq_len < 1) {
    throw_validation("latency params: counts must be >= 1");
  }
  if (flops_per_sec_per_gpu <= 0.0 ||
      interconnect_bandwidth_bytes_per_sec <= 0.0) {
    throw_validation("latency params: rates must be positive");
  }
  if (all2all_latency_floor_sec < 0.0) {
    throw_validation("latency params: all2all_latency_floor_sec must be >= 0");
  }
  if (bytes_per_activation < 1) {
    throw_validation("latency params: bytes_per_activation must be >= 1");
  }
  if (expert_parallel_degree > n_gpus) {
    throw_validation("latency params: expert_parallel_degree " +
                     std::to_string(expert_parallel_degree) +
                     " exceeds n_gpus " + std::to_string(n_gpus));
  }
  if (n_gpus % expert_parallel_degree != 0) {
    throw_validation("latency params: n_gpus must be divisible by "
                     "expert_parallel_degree");
  }
  if (config.n_experts % expert_parallel_degree != 0) {
    throw_validation("latency params: expert_parallel_degree " +
                     std::to_string(expert_parallel_degree) +
                     " does not divide n_experts " +
                     std::to_string(config.n_experts));
  }
}

LatencyParams latency_params_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::format,
                std::string("latency params are not valid JSON: ") + e.what());
  }
  static const std::set<std::string> known = {
      "n_gpus",          "expert_parallel_degree",
      "batch_per_gpu",   "seq_len",
      "flops_per_sec_per_gpu", "interconnect_bandwidth_bytes_per_sec",
      "all2all_latency_floor_sec", "bytes_per_activation"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known.count(it.key())) {
      throw_validation("latency params: unknown field \"" + it.key() + "\"");
    }
  }
  LatencyParams p;
  try {
    p.n_gpus = doc.at("n_gpus").get<uint32_t>();
    p.expert_parallel_degree = doc.at("expert_parallel_degree").get<uint32_t>();
    p.batch_per_gpu = doc.at("batch_per_gpu").get<uint32_t>();
    p.seq_len = doc.at("seq_len").get<uint32_t>();
    p.flops_per_sec_per_gpu = doc.at("flops_per_sec_per_gpu").get<double>();
    p.interconnect_bandwidth_bytes_per_sec =
        doc.at("interconnect_bandwidth_bytes_per_sec").get<double>();
    p.all2all_latency_floor_sec =
        doc.at("all2all_latency_floor_sec").get<double>();
    if (doc.contains("bytes_per_activation")) {
      p.bytes_per_activation = doc.at("bytes_per_activation").get<uint32_t>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::format,
                std::string("latency params missing or mistyped field: ") +
                    e.what());
  }
  return p;
}

std::string latency_params_to_json(const LatencyParams& p) {
  json doc;
  doc["n_gpus"] = p.n_gpus;
  doc["expert_parallel_degree"] = p.expert_parallel_degree;
  doc["batch_per_gpu"] = p.batch_per_gpu;
  doc["seq_len"] = p.seq_len;
  doc["flops_per_sec_per_gpu"] = p.flops_per_sec_per_gpu;
  doc["interconnect_bandwidth_bytes_per_sec"] =
      p.interconnect_bandwidth_bytes_per_sec;
  doc["all2all_latency_floor_sec"] = p.all2all_latency_floor_sec;
  doc["bytes_per_activation"] = p.bytes_per_activation;
  return doc.dump();
}

LatencyReport simulate(const ModelConfig& config, const LatencyParams& params,
                       RoutingModel routing, const RouterTrace* trace) {
  config.validate();
  params.validate(config);
  if (routing == RoutingModel::observed && trace == nullptr) {
    throw_validation("observed routing requires a trace");
  }

  const double d = static_cast<double>(config.d_model);
  const double tokens = static_cast<double>(params.n_gpus) *
                        params.batch_per_gpu * params.seq_len;
  const double ffn_flops_per_token = 24.0 * d * d;
  const uint32_t g = params.n_gpus;
  const uint32_t ep = params.expert_parallel_degree;
  const uint32_t m = config.n_experts;

  LatencyReport report;
  for (uint32_t l = 0; l < config.n_layers; ++l) {
    LayerLatency layer;
    layer.layer_id = l;
    layer.is_moe = config.is_moe_layer(l);
    if (!layer.is_moe) {
      // Data-parallel dense FFN: each GPU processes its local tokens.
      layer.expert_compute_sec = (tokens / g) * ffn_flops_per_token /
                                 params.flops_per_sec_per_gpu;
    } else {
      double max_load = 0.0;
      if (routing == RoutingModel::uniform) {
        // tokens/M per expert, M/EP experts per GPU.
        max_load = tokens / m * (static_cast<double>(m) / ep);
      } else {
        if (!trace->has_layer(l)) {
          throw_validation("trace has no layer " + std::to_string(l) +
                           " for observed routing");
        }
        if (trace->layer(l).z != m) {
          throw_validation("trace expert count does not match config in layer " +
                           std::to_string(l));
        }
        const Vec freq = frequencies(*trace, l).frequencies;
        Vec gpu_load(ep, 0.0);
        for (uint32_t e = 0; e < m; ++e) {
          gpu_load[e % ep] += freq[e] * tokens;  // round-robin placement
        }
        for (double v : gpu_load) max_load = std::max(max_load, v);
      }
      layer.expert_compute_sec =
          max_load * ffn_flops_per_token / params.flops_per_sec_per_gpu;

      double volume_bytes = 0.0;
      if (ep > 1) {
        const double cross_fraction = (static_cast<double>(g) - 1.0) / g;
        volume_bytes = cross_fraction * tokens * d * params.bytes_per_activation;
      }
      // Two collectives per MoE layer: dispatch and combine.
      layer.all2all_sec =
          2.0 * (params.all2all_latency_floor_sec +
                 volume_bytes / params.interconnect_bandwidth_bytes_per_sec);
    }
    layer.total_sec = layer.expert_compute_sec + layer.all2all_sec;
    report.expert_compute_sec += layer.expert_compute_sec;
    report.all2all_sec += layer.all2all_sec;
    report.total_sec += layer.total_sec;
    report.layers.push_back(layer);
  }
  report.all2all_fraction =
      report.total_sec > 0.0 ? report.all2all_sec / report.total_sec : 0.0;
  return report;
}

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "experts") return SweepAxis::experts;
  if (name == "gpus") return SweepAxis::gpus;
  if (name == "batch") return SweepAxis::batch;
  throw_validation("unknown sweep axis \"" + name +
                   "\" (expected experts|gpus|batch)");
}

std::vector<SweepRow> sweep(const ModelConfig& config,
                            const LatencyParams& params, SweepAxis axis,
                            const std::vector<uint64_t>& values,
                            RoutingModel routing, const RouterTrace* trace) {
  if (values.empty()) throw_validation("sweep requires at least one value");
  std::vector<SweepRow> rows;
  for (uint64_t v : values) {
    if (v < 1) throw_validation("sweep values must be >= 1");
    ModelConfig c = config;
    LatencyParams p = params;
    switch (axis) {
      case SweepAxis::experts: c.n_experts = static_cast<uint32_t>(v); break;
      case SweepAxis::gpus: p.n_gpus = static_cast<uint32_t>(v); break;
      case SweepAxis::batch: p.batch_per_gpu = static_cast<uint32_t>(v); break;
    }
    rows.push_back({v, simulate(c, p, routing, trace)});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "axis_value,expert_compute_sec,all2all_sec,total_sec,all2all_fraction\n";
  char line[256];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%llu,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(row.axis_value),
                  row.report.expert_compute_sec, row.report.all2all_sec,
                  row.report.total_sec, row.report.all2all_fraction);
    out += line;
  }
  return out;
}

std::string latency_report_json(const LatencyReport& report) {
  json layers = json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"layer", l.layer_id},
                      {"is_moe", l.is_moe},
                      {"expert_compute_sec", l.expert_compute_sec},
                      {"all2all_sec", l.all2all_sec},
                      {"total_sec", l.total_sec}});
  }
  json doc;
  doc["layers"] = std::move(layers);
  doc["expert_compute_sec"] = report.expert_compute_sec;
  doc["all2all_sec"] = report.all2all_sec;
  doc["total_sec"] = report.total_sec;
  doc["all2all_fraction"] = report.all2all_fraction;
  return doc.dump();
}

}  // namespace smoekit
