#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "config.hpp"
#include "trace.hpp"

namespace smoekit {

// Inputs to the closed-form expert-parallel inference cost model. This is an
// analytical model of trends (compute vs All2All decomposition), not a
// packet-level simulator.
struct LatencyParams {
  uint32_t n_gpus = 0;
  uint32_t expert_parallel_degree = 0;  // EP; experts sharded over EP GPUs
  uint32_t batch_per_gpu = 0;
  uint32_t seq_len = 0;
  double flops_per_sec_per_gpu = 0.0;
  double interconnect_bandwidth_bytes_per_sec = 0.0;
  double all2all_latency_floor_sec = 0.0;  // fixed cost per collective
  uint32_t bytes_per_activation = 2;       // half-precision activations

  void validate(const ModelConfig& config) const;
};

LatencyParams latency_params_from_json(const std::string& json_text);
std::string latency_params_to_json(const LatencyParams& params);

struct LayerLatency {
  uint32_t layer_id = 0;
  bool is_moe = false;
  double expert_compute_sec = 0.0;
  double all2all_sec = 0.0;
  double total_sec = 0.0;
};

struct LatencyReport {
  std::vector<LayerLatency> layers;  // every layer; dense rows carry no a2a
  double expert_compute_sec = 0.0;
  double all2all_sec = 0.0;
  double total_sec = 0.0;
  double all2all_fraction = 0.0;
};

enum class RoutingModel { uniform, observed };

// Per MoE layer: expert compute time is the busiest GPU's token load times the
// per-token FFN FLOPs over the GPU rate; the load is T/EP under uniform
// routing or trace-frequency-weighted under observed routing with round-robin
// expert placement (expert e on GPU e mod EP). All2All costs two collectives
// (dispatch + combine), each a latency floor plus the cross-GPU volume
// (G-1)/G * T * d_model * bytes_per_activation over the bandwidth; EP = 1
// keeps every expert local, so only the floors remain. Dense layers contribute
// data-parallel compute only.
LatencyReport simulate(const ModelConfig& config, const LatencyParams& params,
                       RoutingModel routing,
                       const RouterTrace* trace = nullptr);

enum class SweepAxis { experts, gpus, batch };

SweepAxis sweep_axis_from_name(const std::string& name);

struct SweepRow {
  uint64_t axis_value = 0;
  LatencyReport report;
};

std::vector<SweepRow> sweep(const ModelConfig& config,
                            const LatencyParams& params, SweepAxis axis,
                            const std::vector<uint64_t>& values,
                            RoutingModel routing = RoutingModel::uniform,
                            const RouterTrace* trace = nullptr);

// Columns: axis_value, expert_compute_sec, all2all_sec, total_sec,
// all2all_fraction.
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::string latency_report_json(const LatencyReport& report);

}  // namespace smoekit
