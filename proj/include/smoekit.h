/* smoekit — toy sparse Mixture-of-Experts models, router-logit tracing,
 * expert-count reduction (cluster merging and frequency baselines), parameter
 * and FLOPs calculators, and an expert-parallelism latency cost model.
 *
 * C API over opaque handles. Every function returns SMK_OK on success or an
 * error code; smk_last_error() returns a thread-local detail message for the
 * most recent failure on the calling thread. Strings returned through out
 * parameters are heap-allocated and must be released with smk_string_free().
 */
#ifndef SMOEKIT_H
#define SMOEKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SMK_API __declspec(dllexport)
#else
#define SMK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum smk_status {
  SMK_OK = 0,
  SMK_ERR_VALIDATION = 1,
  SMK_ERR_IO = 2,
  SMK_ERR_FORMAT = 3,
  SMK_ERR_DIGEST = 4,
  SMK_ERR_VERSION = 5,
  SMK_ERR_CONVERGENCE = 6,
  SMK_ERR_DEGENERATE = 7,
  SMK_ERR_HASH_MISMATCH = 8,
  SMK_ERR_INTERNAL = 9
} smk_status;

typedef struct smk_model smk_model;
typedef struct smk_trace smk_trace;
typedef struct smk_plan smk_plan;

/* Stable lowercase name of a status code, e.g. "validation". */
SMK_API const char* smk_status_name(smk_status status);

/* Detail message of the last error on this thread; empty string if none. */
SMK_API const char* smk_last_error(void);

SMK_API void smk_string_free(char* s);
SMK_API void smk_model_free(smk_model* model);
SMK_API void smk_trace_free(smk_trace* trace);
SMK_API void smk_plan_free(smk_plan* plan);

/* ---- models ---- */

/* Random init: weights N(0, 0.02^2), deterministic under seed. */
SMK_API smk_status smk_model_init_random(const char* config_json, uint64_t seed,
                                         smk_model** out_model);

/* Planted init for clustering oracles; labels_json receives the ground-truth
 * group ids per MoE layer (pass NULL to skip). */
SMK_API smk_status smk_model_init_planted(const char* config_json,
                                          uint32_t n_groups, double noise_std,
                                          uint64_t seed, smk_model** out_model,
                                          char** labels_json);

SMK_API smk_status smk_model_load(const char* path, smk_model** out_model);

/* Writes the .smoe container; digest_out (32 bytes, optional) receives the
 * content digest. */
SMK_API smk_status smk_model_save(const smk_model* model, const char* path,
                                  uint8_t* digest_out);

SMK_API smk_status smk_model_config_json(const smk_model* model,
                                         char** out_json);

/* ---- calculators ---- */

SMK_API smk_status smk_param_count_json(const char* config_json,
                                        char** out_json);

SMK_API smk_status smk_flops_json(const char* config_json, char** out_json);

/* ---- tracing ---- */

/* Harvests router logits and selection counts over a token-id stream file
 * (little-endian u32, no header). */
SMK_API smk_status smk_trace_harvest(const smk_model* model,
                                     const char* data_path, uint32_t batch,
                                     uint32_t seq, uint64_t max_positions,
                                     smk_trace** out_trace);

SMK_API smk_status smk_trace_save(const smk_trace* trace, const char* path);
SMK_API smk_status smk_trace_load(const char* path, smk_trace** out_trace);

/* ---- reduction ---- */

/* method: "uncurl" | "freq-prune" | "freq-merge" | "global-merge". */
SMK_API smk_status smk_reduce_plan(const smk_model* model,
                                   const smk_trace* trace, const char* method,
                                   uint32_t target, uint64_t seed,
                                   int skip_first_moe, int allow_degenerate,
                                   smk_plan** out_plan);

SMK_API smk_status smk_plan_to_json(const smk_plan* plan, char** out_json);
SMK_API smk_status smk_plan_from_json(const char* json_text,
                                      smk_plan** out_plan);

SMK_API smk_status smk_plan_apply(const smk_model* model, const smk_plan* plan,
                                  uint64_t seed, smk_model** out_model);

/* Writes one CSV per MoE layer (expert id, spectral-embedding coordinates,
 * cluster label, selection frequency) for the uncurl clustering. */
SMK_API smk_status smk_export_clusters(const smk_model* model,
                                       const smk_trace* trace, uint32_t target,
                                       uint64_t seed, const char* out_dir);

/* ---- evaluation ---- */

SMK_API smk_status smk_eval_nll(const smk_model* model, const char* data_path,
                                uint32_t batch, uint32_t seq, double* out_nll);

/* ---- latency model ---- */

/* Single-point simulation; trace may be NULL for uniform routing. */
SMK_API smk_status smk_latency_simulate(const char* config_json,
                                        const char* params_json,
                                        const smk_trace* trace,
                                        char** out_report_json);

/* axis: "experts" | "gpus" | "batch". Returns CSV text. */
SMK_API smk_status smk_latency_sweep_csv(const char* config_json,
                                         const char* params_json,
                                         const char* axis,
                                         const uint64_t* values,
                                         size_t n_values, char** out_csv);

#ifdef __cplusplus
}
#endif

#endif /* SMOEKIT_H */
