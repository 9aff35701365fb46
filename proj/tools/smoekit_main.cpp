// Command-line front end for the smoekit shared library. Talks to the library
// exclusively through the C API in smoekit.h.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smoekit.h"

namespace {

struct CliError {
  std::string category;
  std::string detail;
};

void check(smk_status status) {
  if (status != SMK_OK) {
    throw CliError{smk_status_name(status), smk_last_error()};
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{"io", "cannot open " + path + " for reading"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{"io", "cannot open " + path + " for writing"};
  out << text;
  if (!out) throw CliError{"io", "short write to " + path};
}

// Owned C string from the library.
struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { smk_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

struct ModelHandle {
  smk_model* ptr = nullptr;
  ~ModelHandle() { smk_model_free(ptr); }
};

struct TraceHandle {
  smk_trace* ptr = nullptr;
  ~TraceHandle() { smk_trace_free(ptr); }
};

struct PlanHandle {
  smk_plan* ptr = nullptr;
  ~PlanHandle() { smk_plan_free(ptr); }
};

void print_breakdown(const std::string& json_text,
                     const std::vector<std::string>& keys,
                     const char* value_header) {
  const auto doc = nlohmann::json::parse(json_text);
  std::printf("%-16s %s\n", "component", value_header);
  for (const auto& key : keys) {
    std::printf("%-16s %llu\n", key.c_str(),
                static_cast<unsigned long long>(doc.at(key).get<uint64_t>()));
  }
}

// "experts=8,32,64,128" -> axis name + values.
std::pair<std::string, std::vector<uint64_t>> parse_sweep(
    const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
    throw CliError{"validation",
                   "sweep must look like axis=v1,v2,... got \"" + spec + "\""};
  }
  std::pair<std::string, std::vector<uint64_t>> out;
  out.first = spec.substr(0, eq);
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.second.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw CliError{"validation", "bad sweep value \"" + item + "\""};
    }
  }
  if (out.second.empty()) {
    throw CliError{"validation", "sweep needs at least one value"};
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy sparse-MoE models: build, trace routers, reduce experts, "
               "count params/FLOPs, simulate latency"};
  app.require_subcommand(1);

  // init
  auto* init = app.add_subcommand("init", "create a randomly initialized model");
  std::string init_config, init_out;
  uint64_t init_seed = 0;
  init->add_option("--config", init_config, "model config JSON")->required();
  init->add_option("--seed", init_seed, "rng seed")->required();
  init->add_option("--out", init_out, "output .smoe path")->required();

  // synth
  auto* synth = app.add_subcommand(
      "synth", "create a planted model with known expert groups");
  std::string synth_config, synth_out, synth_labels;
  uint32_t synth_groups = 0;
  double synth_noise = 0.0;
  uint64_t synth_seed = 0;
  synth->add_option("--config", synth_config, "model config JSON")->required();
  synth->add_option("--groups", synth_groups, "number of planted groups")
      ->required();
  synth->add_option("--noise", synth_noise, "noise std around group bases")
      ->required();
  synth->add_option("--seed", synth_seed, "rng seed")->required();
  synth->add_option("--out", synth_out, "output .smoe path")->required();
  synth->add_option("--labels", synth_labels, "ground-truth labels JSON path");

  // trace
  auto* trace_cmd = app.add_subcommand(
      "trace", "harvest router logits and selection counts over a stream");
  std::string trace_model, trace_data, trace_out;
  uint32_t trace_batch = 0, trace_seq = 0;
  uint64_t trace_max_positions = 65536;
  trace_cmd->add_option("--model", trace_model, "model .smoe path")->required();
  trace_cmd->add_option("--data", trace_data, "token stream (u32 ids)")
      ->required();
  trace_cmd->add_option("--batch", trace_batch, "sequences per pass")
      ->required();
  trace_cmd->add_option("--seq", trace_seq, "tokens per sequence")->required();
  trace_cmd->add_option("--max-positions", trace_max_positions,
                        "token positions to trace (default 65536)");
  trace_cmd->add_option("--out", trace_out, "output .smtr path")->required();

  // reduce
  auto* reduce = app.add_subcommand(
      "reduce", "reduce the per-layer expert count using a harvested trace");
  std::string reduce_method, reduce_model, reduce_trace, reduce_out, reduce_plan;
  uint32_t reduce_target = 0;
  uint64_t reduce_seed = 0;
  bool reduce_skip_first = false, reduce_allow_degenerate = false;
  reduce->add_option("--method", reduce_method,
                     "uncurl|freq-prune|freq-merge|global-merge")
      ->required();
  reduce->add_option("--model", reduce_model, "model .smoe path")->required();
  reduce->add_option("--trace", reduce_trace, "trace .smtr path")->required();
  reduce->add_option("--target", reduce_target, "experts per layer after "
                     "reduction (average for global-merge)")
      ->required();
  reduce->add_option("--seed", reduce_seed, "rng seed")->required();
  reduce->add_option("--out", reduce_out, "output .smoe path")->required();
  reduce->add_option("--plan", reduce_plan, "write the merge plan JSON here");
  reduce->add_flag("--skip-first-moe", reduce_skip_first,
                   "leave the first MoE layer untouched");
  reduce->add_flag("--allow-degenerate", reduce_allow_degenerate,
                   "fold never-routed experts in with zero weight");

  // params
  auto* params = app.add_subcommand("params", "print parameter counts");
  std::string params_config;
  params->add_option("--config", params_config, "model config JSON")->required();

  // flops
  auto* flops = app.add_subcommand("flops", "print FLOPs per token");
  std::string flops_config;
  flops->add_option("--config", flops_config, "model config JSON")->required();

  // latency
  auto* latency = app.add_subcommand(
      "latency", "sweep the expert-parallel latency cost model");
  std::string lat_config, lat_params, lat_sweep, lat_out;
  latency->add_option("--config", lat_config, "model config JSON")->required();
  latency->add_option("--params", lat_params, "latency params JSON")->required();
  latency->add_option("--sweep", lat_sweep, "axis=v1,v2,... "
                      "(axis: experts|gpus|batch)")
      ->required();
  latency->add_option("--out", lat_out, "output CSV path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "print mean next-token NLL");
  std::string eval_model, eval_data;
  uint32_t eval_batch = 0, eval_seq = 0;
  eval->add_option("--model", eval_model, "model .smoe path")->required();
  eval->add_option("--data", eval_data, "token stream (u32 ids)")->required();
  eval->add_option("--batch", eval_batch, "sequences per pass")->required();
  eval->add_option("--seq", eval_seq, "tokens per sequence")->required();

  // export-clusters
  auto* exportc = app.add_subcommand(
      "export-clusters", "write spectral embeddings and cluster labels as CSV");
  std::string exp_model, exp_trace, exp_dir;
  uint32_t exp_target = 0;
  uint64_t exp_seed = 0;
  exportc->add_option("--model", exp_model, "model .smoe path")->required();
  exportc->add_option("--trace", exp_trace, "trace .smtr path")->required();
  exportc->add_option("--target", exp_target, "number of clusters")->required();
  exportc->add_option("--out-dir", exp_dir, "output directory")->required();
  exportc->add_option("--seed", exp_seed, "rng seed (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*init) {
      ModelHandle model;
      check(smk_model_init_random(read_text_file(init_config).c_str(),
                                  init_seed, &model.ptr));
      check(smk_model_save(model.ptr, init_out.c_str(), nullptr));
    } else if (*synth) {
      ModelHandle model;
      OwnedString labels;
      check(smk_model_init_planted(read_text_file(synth_config).c_str(),
                                   synth_groups, synth_noise, synth_seed,
                                   &model.ptr,
                                   synth_labels.empty() ? nullptr : &labels.ptr));
      check(smk_model_save(model.ptr, synth_out.c_str(), nullptr));
      if (!synth_labels.empty()) write_text_file(synth_labels, labels.str());
    } else if (*trace_cmd) {
      ModelHandle model;
      check(smk_model_load(trace_model.c_str(), &model.ptr));
      TraceHandle trace;
      check(smk_trace_harvest(model.ptr, trace_data.c_str(), trace_batch,
                              trace_seq, trace_max_positions, &trace.ptr));
      check(smk_trace_save(trace.ptr, trace_out.c_str()));
    } else if (*reduce) {
      ModelHandle model;
      check(smk_model_load(reduce_model.c_str(), &model.ptr));
      TraceHandle trace;
      check(smk_trace_load(reduce_trace.c_str(), &trace.ptr));
      PlanHandle plan;
      check(smk_reduce_plan(model.ptr, trace.ptr, reduce_method.c_str(),
                            reduce_target, reduce_seed, reduce_skip_first,
                            reduce_allow_degenerate, &plan.ptr));
      if (!reduce_plan.empty()) {
        OwnedString plan_json;
        check(smk_plan_to_json(plan.ptr, &plan_json.ptr));
        write_text_file(reduce_plan, plan_json.str());
      }
      ModelHandle reduced;
      check(smk_plan_apply(model.ptr, plan.ptr, reduce_seed, &reduced.ptr));
      check(smk_model_save(reduced.ptr, reduce_out.c_str(), nullptr));
    } else if (*params) {
      OwnedString json;
      check(smk_param_count_json(read_text_file(params_config).c_str(),
                                 &json.ptr));
      print_breakdown(json.str(),
                      {"embedding", "attention", "dense_ffn", "experts",
                       "routers", "total"},
                      "parameters");
    } else if (*flops) {
      OwnedString json;
      check(smk_flops_json(read_text_file(flops_config).c_str(), &json.ptr));
      print_breakdown(json.str(),
                      {"ffn", "qkvo", "attention", "router", "total_activated"},
                      "flops_per_token");
    } else if (*latency) {
      const auto [axis, values] = parse_sweep(lat_sweep);
      OwnedString csv;
      check(smk_latency_sweep_csv(read_text_file(lat_config).c_str(),
                                  read_text_file(lat_params).c_str(),
                                  axis.c_str(), values.data(), values.size(),
                                  &csv.ptr));
      write_text_file(lat_out, csv.str());
    } else if (*eval) {
      ModelHandle model;
      check(smk_model_load(eval_model.c_str(), &model.ptr));
      double nll = 0.0;
      check(smk_eval_nll(model.ptr, eval_data.c_str(), eval_batch, eval_seq,
                         &nll));
      std::printf("mean_nll %.17g\n", nll);
    } else if (*exportc) {
      ModelHandle model;
      check(smk_model_load(exp_model.c_str(), &model.ptr));
      TraceHandle trace;
      check(smk_trace_load(exp_trace.c_str(), &trace.ptr));
      check(smk_export_clusters(model.ptr, trace.ptr, exp_target, exp_seed,
                                exp_dir.c_str()));
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.category.c_str(),
                 e.detail.c_str());
    return 1;
  }
  return 0;
}
