#include <doctest.h>

#include <sstream>

#include "error.hpp"
#include "latsim.hpp"
#include "testutil.hpp"

using namespace smoekit;
using namespace testutil;

namespace {

ModelConfig lat_config(uint32_t n_experts = 8) {
  ModelConfig c;
  c.d_model = 1024;
  c.d_ff = 4096;
  c.n_heads = 16;
  c.n_layers = 24;
  c.n_experts = n_experts;
  c.vocab_size = 50257;
  c.context_length = 1024;
  for (uint32_t i = 0; i < 24; i += 2) c.moe_layer_indices.push_back(i);
  return c;
}

LatencyParams base_params() {
  LatencyParams p;
  p.n_gpus = 8;
  p.expert_parallel_degree = 2;
  p.batch_per_gpu = 2;
  p.seq_len = 256;
  p.flops_per_sec_per_gpu = 60e12;
  p.interconnect_bandwidth_bytes_per_sec = 50e9;
  p.all2all_latency_floor_sec = 20e-6;
  p.bytes_per_activation = 2;
  return p;
}

RouterTrace skewed_trace(const ModelConfig& cfg) {
  RouterTrace t;
  t.n_positions = 64;
  for (uint32_t l : cfg.moe_layer_indices) {
    TraceLayer layer;
    layer.layer_id = l;
    layer.z = cfg.n_experts;
    layer.logits.assign(64 * cfg.n_experts, 0.0f);
    layer.selection_counts.assign(cfg.n_experts, 0);
    layer.selection_counts[0] = 64;  // everything lands on expert 0
    t.layers.push_back(std::move(layer));
  }
  return t;
}

}  // namespace

TEST_SUITE("latency_params") {
  TEST_CASE("JSON round trip and defaults") {
    const LatencyParams p = base_params();
    const LatencyParams back = latency_params_from_json(latency_params_to_json(p));
    CHECK(back.n_gpus == 8);
    CHECK(back.bytes_per_activation == 2);
    const LatencyParams defaulted = latency_params_from_json(
        R"({"n_gpus": 4, "expert_parallel_degree": 2, "batch_per_gpu": 1,
            "seq_len": 128, "flops_per_sec_per_gpu": 1e12,
            "interconnect_bandwidth_bytes_per_sec": 1e10,
            "all2all_latency_floor_sec": 1e-5})");
    CHECK(defaulted.bytes_per_activation == 2);
  }

  TEST_CASE("constraint validation") {
    const ModelConfig cfg = lat_config(8);
    LatencyParams p = base_params();
    p.expert_parallel_degree = 16;  // exceeds n_gpus
    CHECK_THROWS_AS(p.validate(cfg), Error);
    p = base_params();
    p.expert_parallel_degree = 3;  // does not divide 8 experts
    CHECK_THROWS_AS(p.validate(cfg), Error);
    p = base_params();
    p.n_gpus = 9;  // not divisible by EP=2
    CHECK_THROWS_AS(p.validate(cfg), Error);
    p = base_params();
    CHECK_THROWS_AS(latency_params_from_json(R"({"n_gpus": 1})"), Error);
  }
}

TEST_SUITE("simulate") {
  TEST_CASE("EP = 1 removes the volume term; only the floors remain") {
    const ModelConfig cfg = lat_config(8);
    LatencyParams p = base_params();
    p.expert_parallel_degree = 1;
    const LatencyReport r = simulate(cfg, p, RoutingModel::uniform);
    const double floors =
        2.0 * p.all2all_latency_floor_sec * cfg.n_moe_layers();
    CHECK(r.all2all_sec == doctest::Approx(floors).epsilon(1e-12));
  }

  TEST_CASE("totals are exactly the sum of the per-layer parts") {
    const ModelConfig cfg = lat_config(8);
    const LatencyReport r = simulate(cfg, base_params(), RoutingModel::uniform);
    double compute = 0.0, a2a = 0.0, total = 0.0;
    for (const auto& layer : r.layers) {
      CHECK(layer.total_sec ==
            doctest::Approx(layer.expert_compute_sec + layer.all2all_sec));
      compute += layer.expert_compute_sec;
      a2a += layer.all2all_sec;
      total += layer.total_sec;
    }
    CHECK(r.expert_compute_sec == doctest::Approx(compute).epsilon(1e-12));
    CHECK(r.all2all_sec == doctest::Approx(a2a).epsilon(1e-12));
    CHECK(r.total_sec == doctest::Approx(total).epsilon(1e-12));
    CHECK(r.all2all_fraction ==
          doctest::Approx(r.all2all_sec / r.total_sec).epsilon(1e-12));
  }

  TEST_CASE("a fully skewed trace raises expert compute above uniform") {
    const ModelConfig cfg = lat_config(8);
    const LatencyParams p = base_params();  // EP = 2
    const RouterTrace t = skewed_trace(cfg);
    const LatencyReport uniform = simulate(cfg, p, RoutingModel::uniform);
    const LatencyReport skewed =
        simulate(cfg, p, RoutingModel::observed, &t);
    CHECK(skewed.expert_compute_sec > uniform.expert_compute_sec);
  }

  TEST_CASE("observed routing validates the trace layer structure") {
    const ModelConfig cfg = lat_config(8);
    const RouterTrace t = skewed_trace(lat_config(16));  // z mismatch
    CHECK_THROWS_AS(simulate(cfg, base_params(), RoutingModel::observed, &t),
                    Error);
    CHECK_THROWS_AS(simulate(cfg, base_params(), RoutingModel::observed, nullptr),
                    Error);
  }
}

TEST_SUITE("sweep") {
  TEST_CASE("experts axis: total and all2all fraction are non-decreasing") {
    const auto rows = sweep(lat_config(8), base_params(), SweepAxis::experts,
                            {8, 32, 64, 128});
    REQUIRE(rows.size() == 4);
    for (size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].report.total_sec >= rows[i - 1].report.total_sec - 1e-15);
      CHECK(rows[i].report.all2all_fraction >=
            rows[i - 1].report.all2all_fraction - 1e-15);
    }
  }

  TEST_CASE("gpus axis: total latency and all2all grow with the cluster") {
    const auto rows =
        sweep(lat_config(8), base_params(), SweepAxis::gpus, {2, 4, 8, 16});
    for (size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].report.total_sec > rows[i - 1].report.total_sec);
      CHECK(rows[i].report.all2all_sec >= rows[i - 1].report.all2all_sec);
    }
  }

  TEST_CASE("single value equals simulate") {
    const ModelConfig cfg = lat_config(8);
    const auto rows = sweep(cfg, base_params(), SweepAxis::batch, {2});
    REQUIRE(rows.size() == 1);
    const LatencyReport direct = simulate(cfg, base_params(), RoutingModel::uniform);
    CHECK(rows[0].report.total_sec == doctest::Approx(direct.total_sec));
  }

  TEST_CASE("CSV has the documented columns, one row per value") {
    const auto rows =
        sweep(lat_config(8), base_params(), SweepAxis::experts, {8, 32});
    const std::string csv = sweep_csv(rows);
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    CHECK(line ==
          "axis_value,expert_compute_sec,all2all_sec,total_sec,all2all_fraction");
    size_t n = 0;
    while (std::getline(ss, line)) ++n;
    CHECK(n == 2);
  }

  TEST_CASE("bad axis values are rejected") {
    CHECK_THROWS_AS(sweep(lat_config(8), base_params(), SweepAxis::experts, {}),
                    Error);
    CHECK_THROWS_AS(
        sweep(lat_config(8), base_params(), SweepAxis::experts, {7}),
        Error);  // EP=2 does not divide 7
    CHECK_THROWS_AS(sweep_axis_from_name("bogus"), Error);
  }
}
