#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace smoekit {

enum class ReduceMethod { uncurl, freq_prune, freq_merge, global_merge };

enum class RouterDisposition { reinitialize, keep_columns };

const char* reduce_method_name(ReduceMethod m);
ReduceMethod reduce_method_from_name(const std::string& name);

// Per-layer reduction recipe. `labels[e]` is the cluster of expert e, or -1
// when the expert is discarded outright (freq-prune). Each cluster has one
// reference expert (a member of the cluster, identity permutation, and the
// source of the kept router column under keep_columns). `permutations[e]`
// maps hidden units of the reference onto expert e's units. Weights are a
// convex combination within every cluster; dropped experts carry weight 0.
struct LayerPlan {
  uint32_t layer_id = 0;
  uint32_t z = 0;
  uint32_t n_clusters = 0;
  bool skipped = false;
  std::vector<int32_t> labels;
  std::vector<uint32_t> references;
  std::vector<std::vector<size_t>> permutations;
  Vec weights;
  RouterDisposition disposition = RouterDisposition::keep_columns;
};

struct MergePlan {
  ReduceMethod method = ReduceMethod::uncurl;
  uint32_t target = 0;
  std::vector<LayerPlan> layers;
};

std::string plan_to_json(const MergePlan& plan);
MergePlan plan_from_json(const std::string& json_text);

}  // namespace smoekit
