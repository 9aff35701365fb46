#include "smoekit.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "checkpoint.hpp"
#include "ckpt_io.hpp"
#include "config.hpp"
#include "counts.hpp"
#include "error.hpp"
#include "forward.hpp"
#include "latsim.hpp"
#include "plan.hpp"
#include "reduce.hpp"
#include "rng.hpp"
#include "token_stream.hpp"
#include "trace.hpp"

using namespace smoekit;

struct smk_model {
  SmoeCheckpoint ckpt;
};

struct smk_trace {
  RouterTrace trace;
};

struct smk_plan {
  MergePlan plan;
};

namespace {

thread_local std::string g_last_error;

// Seed sub-streams, so one user-facing seed drives every stage of a command
// without the stages sharing random state.
constexpr uint64_t kStreamInit = 1;
constexpr uint64_t kStreamPlant = 2;
constexpr uint64_t kStreamPlan = 3;
constexpr uint64_t kStreamApply = 4;

smk_status category_status(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return SMK_ERR_VALIDATION;
    case ErrorCategory::io: return SMK_ERR_IO;
    case ErrorCategory::format: return SMK_ERR_FORMAT;
    case ErrorCategory::digest: return SMK_ERR_DIGEST;
    case ErrorCategory::version: return SMK_ERR_VERSION;
    case ErrorCategory::convergence: return SMK_ERR_CONVERGENCE;
    case ErrorCategory::degenerate: return SMK_ERR_DEGENERATE;
    case ErrorCategory::hash_mismatch: return SMK_ERR_HASH_MISMATCH;
    case ErrorCategory::internal: return SMK_ERR_INTERNAL;
  }
  return SMK_ERR_INTERNAL;
}

template <typename Fn>
smk_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SMK_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return category_status(e.category());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SMK_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw_validation(std::string("null argument: ") + what);
}

}  // namespace

const char* smk_status_name(smk_status status) {
  switch (status) {
    case SMK_OK: return "ok";
    case SMK_ERR_VALIDATION: return "validation";
    case SMK_ERR_IO: return "io";
    case SMK_ERR_FORMAT: return "format";
    case SMK_ERR_DIGEST: return "digest";
    case SMK_ERR_VERSION: return "version";
    case SMK_ERR_CONVERGENCE: return "convergence";
    case SMK_ERR_DEGENERATE: return "degenerate";
    case SMK_ERR_HASH_MISMATCH: return "hash_mismatch";
    case SMK_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

const char* smk_last_error(void) { return g_last_error.c_str(); }

void smk_string_free(char* s) { ::free(s); }
void smk_model_free(smk_model* model) { delete model; }
void smk_trace_free(smk_trace* trace) { delete trace; }
void smk_plan_free(smk_plan* plan) { delete plan; }

smk_status smk_model_init_random(const char* config_json, uint64_t seed,
                                 smk_model** out_model) {
  return guarded([&] {
    require(config_json && out_model, "config_json/out_model");
    const ModelConfig config = config_from_json(config_json);
    Rng rng(derive_seed(seed, kStreamInit));
    *out_model = new smk_model{init_random(config, rng)};
  });
}

smk_status smk_model_init_planted(const char* config_json, uint32_t n_groups,
                                  double noise_std, uint64_t seed,
                                  smk_model** out_model, char** labels_json) {
  return guarded([&] {
    require(config_json && out_model, "config_json/out_model");
    const ModelConfig config = config_from_json(config_json);
    Rng rng(derive_seed(seed, kStreamPlant));
    PlantedModel planted = init_planted(config, n_groups, noise_std, rng);
    if (labels_json) {
      nlohmann::json layers = nlohmann::json::array();
      size_t li = 0;
      for (uint32_t layer_id : planted.checkpoint.config.moe_layer_indices) {
        layers.push_back(
            {{"layer", layer_id}, {"labels", planted.labels[li++]}});
      }
      nlohmann::json doc;
      doc["layers"] = std::move(layers);
      *labels_json = copy_string(doc.dump(2));
    }
    *out_model = new smk_model{std::move(planted.checkpoint)};
  });
}

smk_status smk_model_load(const char* path, smk_model** out_model) {
  return guarded([&] {
    require(path && out_model, "path/out_model");
    *out_model = new smk_model{load_checkpoint(path)};
  });
}

smk_status smk_model_save(const smk_model* model, const char* path,
                          uint8_t* digest_out) {
  return guarded([&] {
    require(model && path, "model/path");
    const Digest d = save_checkpoint(model->ckpt, path);
    if (digest_out) std::memcpy(digest_out, d.data(), d.size());
  });
}

smk_status smk_model_config_json(const smk_model* model, char** out_json) {
  return guarded([&] {
    require(model && out_json, "model/out_json");
    *out_json = copy_string(config_to_json(model->ckpt.config));
  });
}

smk_status smk_param_count_json(const char* config_json, char** out_json) {
  return guarded([&] {
    require(config_json && out_json, "config_json/out_json");
    *out_json = copy_string(
        param_breakdown_json(param_count(config_from_json(config_json))));
  });
}

smk_status smk_flops_json(const char* config_json, char** out_json) {
  return guarded([&] {
    require(config_json && out_json, "config_json/out_json");
    *out_json = copy_string(
        flops_breakdown_json(flops_per_token(config_from_json(config_json))));
  });
}

smk_status smk_trace_harvest(const smk_model* model, const char* data_path,
                             uint32_t batch, uint32_t seq,
                             uint64_t max_positions, smk_trace** out_trace) {
  return guarded([&] {
    require(model && data_path && out_trace, "model/data_path/out_trace");
    const std::vector<uint32_t> stream = load_token_stream(data_path);
    *out_trace =
        new smk_trace{harvest(model->ckpt, stream, batch, seq, max_positions)};
  });
}

smk_status smk_trace_save(const smk_trace* trace, const char* path) {
  return guarded([&] {
    require(trace && path, "trace/path");
    save_trace(trace->trace, path);
  });
}

smk_status smk_trace_load(const char* path, smk_trace** out_trace) {
  return guarded([&] {
    require(path && out_trace, "path/out_trace");
    *out_trace = new smk_trace{load_trace(path)};
  });
}

smk_status smk_reduce_plan(const smk_model* model, const smk_trace* trace,
                           const char* method, uint32_t target, uint64_t seed,
                           int skip_first_moe, int allow_degenerate,
                           smk_plan** out_plan) {
  return guarded([&] {
    require(model && trace && method && out_plan, "model/trace/method/out_plan");
    ReduceOptions options;
    options.skip_first_moe = skip_first_moe != 0;
    options.allow_degenerate = allow_degenerate != 0;
    const ReduceMethod m = reduce_method_from_name(method);
    MergePlan plan;
    switch (m) {
      case ReduceMethod::uncurl: {
        Rng rng(derive_seed(seed, kStreamPlan));
        plan = uncurl_plan(trace->trace, model->ckpt, target, rng, options).plan;
        break;
      }
      case ReduceMethod::freq_prune:
        plan = freq_prune_plan(trace->trace, model->ckpt, target, options);
        break;
      case ReduceMethod::freq_merge:
        plan = freq_merge_plan(trace->trace, model->ckpt, target, options);
        break;
      case ReduceMethod::global_merge:
        plan = global_merge_plan(trace->trace, model->ckpt, target, options);
        break;
    }
    *out_plan = new smk_plan{std::move(plan)};
  });
}

smk_status smk_plan_to_json(const smk_plan* plan, char** out_json) {
  return guarded([&] {
    require(plan && out_json, "plan/out_json");
    *out_json = copy_string(plan_to_json(plan->plan));
  });
}

smk_status smk_plan_from_json(const char* json_text, smk_plan** out_plan) {
  return guarded([&] {
    require(json_text && out_plan, "json_text/out_plan");
    *out_plan = new smk_plan{plan_from_json(json_text)};
  });
}

smk_status smk_plan_apply(const smk_model* model, const smk_plan* plan,
                          uint64_t seed, smk_model** out_model) {
  return guarded([&] {
    require(model && plan && out_model, "model/plan/out_model");
    Rng rng(derive_seed(seed, kStreamApply));
    *out_model = new smk_model{apply_plan(model->ckpt, plan->plan, rng)};
  });
}

smk_status smk_export_clusters(const smk_model* model, const smk_trace* trace,
                               uint32_t target, uint64_t seed,
                               const char* out_dir) {
  return guarded([&] {
    require(model && trace && out_dir, "model/trace/out_dir");
    Rng rng(derive_seed(seed, kStreamPlan));
    PlanResult result = uncurl_plan(trace->trace, model->ckpt, target, rng);
    export_clusters(result.report, result.plan, trace->trace, out_dir);
  });
}

smk_status smk_eval_nll(const smk_model* model, const char* data_path,
                        uint32_t batch, uint32_t seq, double* out_nll) {
  return guarded([&] {
    require(model && data_path && out_nll, "model/data_path/out_nll");
    const std::vector<uint32_t> stream = load_token_stream(data_path);
    *out_nll = evaluate_nll(model->ckpt, stream, batch, seq);
  });
}

smk_status smk_latency_simulate(const char* config_json,
                                const char* params_json,
                                const smk_trace* trace,
                                char** out_report_json) {
  return guarded([&] {
    require(config_json && params_json && out_report_json,
            "config_json/params_json/out_report_json");
    const ModelConfig config = config_from_json(config_json);
    const LatencyParams params = latency_params_from_json(params_json);
    const LatencyReport report =
        simulate(config, params,
                 trace ? RoutingModel::observed : RoutingModel::uniform,
                 trace ? &trace->trace : nullptr);
    *out_report_json = copy_string(latency_report_json(report));
  });
}

smk_status smk_latency_sweep_csv(const char* config_json,
                                 const char* params_json, const char* axis,
                                 const uint64_t* values, size_t n_values,
                                 char** out_csv) {
  return guarded([&] {
    require(config_json && params_json && axis && values && out_csv,
            "config_json/params_json/axis/values/out_csv");
    const ModelConfig config = config_from_json(config_json);
    const LatencyParams params = latency_params_from_json(params_json);
    const std::vector<uint64_t> vals(values, values + n_values);
    const auto rows = sweep(config, params, sweep_axis_from_name(axis), vals);
    *out_csv = copy_string(sweep_csv(rows));
  });
}
