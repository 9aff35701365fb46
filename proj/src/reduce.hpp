#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "plan.hpp"
#include "rng.hpp"
#include "similarity.hpp"
#include "trace.hpp"

namespace smoekit {

struct ReduceOptions {
  // Leave the first MoE layer untouched by the reduction.
  bool skip_first_moe = false;
  // Fold experts with zero-norm logit columns into the nearest cluster (by
  // router-column cosine) with zero merge weight instead of failing.
  bool allow_degenerate = false;
};

struct SimilarityLayerReport {
  uint32_t layer_id = 0;
  Matrix s;         // z x z rescaled similarity
  Matrix f;         // z x d row-normalized spectral embedding
  Vec eigenvalues;  // d smallest Laplacian eigenvalues
};

struct SimilarityReport {
  std::vector<SimilarityLayerReport> layers;
};

struct PlanResult {
  MergePlan plan;
  SimilarityReport report;
};

// Layer-wise cluster merging: rescaled logit-cosine similarity, spectral
// embedding, k-means into d clusters, per-cluster permutation alignment to the
// most frequently selected member, frequency-weighted averaging, and router
// reinitialization.
//
// Cost per layer over z experts and n traced positions: the similarity matrix
// is O(z^2 n) and dominates once n >> z; the eigensolve and each hidden-unit
// assignment are O(z^3) and O(d_ff^3), k-means O(iters * z * d).
PlanResult uncurl_plan(const RouterTrace& trace, const SmoeCheckpoint& ckpt,
                       uint32_t d, Rng& rng, const ReduceOptions& options = {});

// Keeps the d most frequently selected experts per layer and discards the
// rest; surviving router columns are retained.
MergePlan freq_prune_plan(const RouterTrace& trace, const SmoeCheckpoint& ckpt,
                          uint32_t d, const ReduceOptions& options = {});

// Top-d frequency anchors per layer; every other expert is grouped with its
// most similar anchor, aligned, and frequency-weight averaged.
MergePlan freq_merge_plan(const RouterTrace& trace, const SmoeCheckpoint& ckpt,
                          uint32_t d, const ReduceOptions& options = {});

// Globally dominant experts across layers (top d_avg * n_moe_layers by
// selection count); within each layer the rest merge into the most similar
// dominant expert. Layers left without a dominant expert promote their local
// top-1, repaying the budget from the bottom of the global ranking. Per-layer
// expert counts vary; the average is d_avg.
MergePlan global_merge_plan(const RouterTrace& trace,
                            const SmoeCheckpoint& ckpt, uint32_t d_avg,
                            const ReduceOptions& options = {});

// Materializes a plan: merged experts per cluster, router reinitialized from
// rng or rebuilt from kept columns, non-MoE weights copied unchanged.
SmoeCheckpoint apply_plan(const SmoeCheckpoint& ckpt, const MergePlan& plan,
                          Rng& rng);

// One CSV per planned layer (expert id, embedding coordinates, cluster label,
// selection frequency) under out_dir.
void export_clusters(const SimilarityReport& report, const MergePlan& plan,
                     const RouterTrace& trace, const std::string& out_dir);

}  // namespace smoekit
