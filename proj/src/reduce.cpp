#include "reduce.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "align.hpp"
#include "ckpt_io.hpp"
#include "cosine.hpp"
#include "error.hpp"
#include "kmeans.hpp"

namespace smoekit {

namespace {

void check_trace_matches(const RouterTrace& trace, const SmoeCheckpoint& ckpt) {
  if (trace.model_hash != checkpoint_digest(ckpt)) {
    throw Error(ErrorCategory::hash_mismatch,
                "trace model digest does not match the checkpoint");
  }
  for (uint32_t l : ckpt.config.moe_layer_indices) {
    if (!trace.has_layer(l)) {
      throw_validation("trace is missing moe layer " + std::to_string(l));
    }
    if (trace.layer(l).z != ckpt.layers[l].ffn.experts.size()) {
      throw_validation("trace expert count mismatch in layer " +
                       std::to_string(l));
    }
  }
}

std::vector<uint32_t> sorted_moe_ids(const SmoeCheckpoint& ckpt) {
  std::vector<uint32_t> ids = ckpt.config.moe_layer_indices;
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Expert indices ordered by (count desc, index asc).
std::vector<uint32_t> ranked_by_count(const std::vector<uint64_t>& counts,
                                      const std::vector<uint32_t>& candidates) {
  std::vector<uint32_t> order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });
  return order;
}

std::vector<size_t> identity_perm(size_t n) {
  std::vector<size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

// Per-layer routing evidence with degenerate experts separated out.
struct LayerEvidence {
  uint32_t layer_id = 0;
  uint32_t z = 0;
  std::vector<uint64_t> counts;
  std::vector<uint32_t> active;      // experts with a usable logit column
  std::vector<uint32_t> degenerate;  // constant (zero-variance) logit columns
  Matrix s_active;                   // |active| x |active| rescaled similarity
};

LayerEvidence gather_evidence(const RouterTrace& trace, uint32_t layer_id,
                              bool allow_degenerate) {
  LayerEvidence ev;
  ev.layer_id = layer_id;
  const TraceLayer& tl = trace.layer(layer_id);
  ev.z = tl.z;
  ev.counts = tl.selection_counts;

  const Matrix h = trace_logits_matrix(tl);
  // An expert with zero logit variance carries no routing signal on this
  // data (the zero-norm column of a never-routed expert is a special case).
  ev.degenerate = constant_columns(h);
  if (!ev.degenerate.empty() && !allow_degenerate) {
    throw Error(ErrorCategory::degenerate,
                "layer " + std::to_string(layer_id) + " expert " +
                    std::to_string(ev.degenerate.front()) +
                    " has a constant logit column (never influenced by the "
                    "router on this data); rerun with --allow-degenerate to "
                    "fold it in");
  }
  std::set<uint32_t> deg(ev.degenerate.begin(), ev.degenerate.end());
  for (uint32_t e = 0; e < ev.z; ++e) {
    if (!deg.count(e)) ev.active.push_back(e);
  }
  if (ev.active.empty()) {
    throw_validation("layer " + std::to_string(layer_id) +
                     " has no non-degenerate experts");
  }

  Matrix h_active(h.rows(), ev.active.size());
  for (size_t i = 0; i < h.rows(); ++i) {
    for (size_t j = 0; j < ev.active.size(); ++j) {
      h_active.at(i, j) = h.at(i, ev.active[j]);
    }
  }
  ev.s_active = cosine_columns(h_active);
  for (size_t i = 0; i < ev.s_active.rows(); ++i) {
    for (size_t j = 0; j < ev.s_active.cols(); ++j) {
      ev.s_active.at(i, j) = std::clamp(0.5 * (1.0 + ev.s_active.at(i, j)), 0.0, 1.0);
    }
    ev.s_active.at(i, i) = 1.0;
  }
  return ev;
}

// Full z x z similarity for reporting; rows of degenerate experts are zero
// off-diagonal.
Matrix full_similarity(const LayerEvidence& ev) {
  Matrix s(ev.z, ev.z);
  for (size_t i = 0; i < ev.z; ++i) s.at(i, i) = 1.0;
  for (size_t i = 0; i < ev.active.size(); ++i) {
    for (size_t j = 0; j < ev.active.size(); ++j) {
      s.at(ev.active[i], ev.active[j]) = ev.s_active.at(i, j);
    }
  }
  return s;
}

double column_cosine(const Matrix& m, size_t a, size_t b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t r = 0; r < m.rows(); ++r) {
    dot += m.at(r, a) * m.at(r, b);
    na += m.at(r, a) * m.at(r, a);
    nb += m.at(r, b) * m.at(r, b);
  }
  if (na == 0.0 || nb == 0.0) return -2.0;  // below any real cosine
  return dot / std::sqrt(na * nb);
}

// Cluster for a degenerate expert: the reference whose router column is most
// similar (ties -> lowest cluster id); a zero router column lands in cluster 0.
uint32_t nearest_cluster_by_router(const RouterWeights& router, uint32_t expert,
                                   const std::vector<uint32_t>& references) {
  uint32_t best = 0;
  double best_cos = -3.0;
  for (uint32_t c = 0; c < references.size(); ++c) {
    const double cs = column_cosine(router.w, expert, references[c]);
    if (cs > best_cos) {
      best_cos = cs;
      best = c;
    }
  }
  return best;
}

// Merge weights: selection counts normalized within each cluster; degenerate
// experts contribute zero; clusters whose active members were never selected
// fall back to uniform over the active members.
Vec cluster_weights(const LayerEvidence& ev, const std::vector<int32_t>& labels,
                    uint32_t n_clusters) {
  std::set<uint32_t> deg(ev.degenerate.begin(), ev.degenerate.end());
  Vec weights(ev.z, 0.0);
  for (uint32_t c = 0; c < n_clusters; ++c) {
    uint64_t total = 0;
    std::vector<uint32_t> members;
    for (uint32_t e = 0; e < ev.z; ++e) {
      if (labels[e] != static_cast<int32_t>(c) || deg.count(e)) continue;
      members.push_back(e);
      total += ev.counts[e];
    }
    for (uint32_t e : members) {
      weights[e] = total > 0 ? static_cast<double>(ev.counts[e]) /
                                   static_cast<double>(total)
                             : 1.0 / static_cast<double>(members.size());
    }
  }
  return weights;
}

LayerPlan skipped_layer_plan(const SmoeCheckpoint& ckpt, uint32_t layer_id) {
  const uint32_t z =
      static_cast<uint32_t>(ckpt.layers[layer_id].ffn.experts.size());
  LayerPlan lp;
  lp.layer_id = layer_id;
  lp.z = z;
  lp.n_clusters = z;
  lp.skipped = true;
  lp.labels.resize(z);
  lp.references.resize(z);
  lp.weights.assign(z, 1.0);
  for (uint32_t e = 0; e < z; ++e) {
    lp.labels[e] = static_cast<int32_t>(e);
    lp.references[e] = e;
    lp.permutations.push_back(identity_perm(ckpt.config.d_ff));
  }
  lp.disposition = RouterDisposition::keep_columns;
  return lp;
}

// Fills permutations: identity for references and dropped experts, weight
// matching against the cluster reference for everyone else.
void fill_permutations(LayerPlan& lp, const SmoeCheckpoint& ckpt) {
  const auto& experts = ckpt.layers[lp.layer_id].ffn.experts;
  lp.permutations.assign(lp.z, {});
  for (uint32_t e = 0; e < lp.z; ++e) {
    if (lp.labels[e] < 0) {
      lp.permutations[e] = identity_perm(ckpt.config.d_ff);
      continue;
    }
    const uint32_t ref = lp.references[lp.labels[e]];
    if (ref == e) {
      lp.permutations[e] = identity_perm(ckpt.config.d_ff);
    } else {
      lp.permutations[e] =
          align_experts(experts[ref], experts[e]).assignment.perm;
    }
  }
}

// Anchor-style layer plan shared by freq-merge and global-merge: anchors keep
// their router columns, everyone else merges into the most similar anchor.
LayerPlan anchored_layer_plan(const LayerEvidence& ev,
                              const SmoeCheckpoint& ckpt,
                              std::vector<uint32_t> anchors) {
  std::sort(anchors.begin(), anchors.end());
  LayerPlan lp;
  lp.layer_id = ev.layer_id;
  lp.z = ev.z;
  lp.n_clusters = static_cast<uint32_t>(anchors.size());
  lp.references = anchors;
  lp.labels.assign(ev.z, -1);
  lp.disposition = RouterDisposition::keep_columns;

  std::map<uint32_t, size_t> active_pos;
  for (size_t i = 0; i < ev.active.size(); ++i) active_pos[ev.active[i]] = i;
  std::set<uint32_t> anchor_set(anchors.begin(), anchors.end());
  for (uint32_t c = 0; c < anchors.size(); ++c) {
    lp.labels[anchors[c]] = static_cast<int32_t>(c);
  }

  for (uint32_t e = 0; e < ev.z; ++e) {
    if (anchor_set.count(e)) continue;
    auto it = active_pos.find(e);
    if (it == active_pos.end()) {
      lp.labels[e] = static_cast<int32_t>(nearest_cluster_by_router(
          ckpt.layers[ev.layer_id].ffn.router, e, lp.references));
      continue;
    }
    // Most similar anchor by the rescaled logit similarity; ties -> the
    // anchor with the lowest expert index (cluster ids follow index order).
    uint32_t best = 0;
    double best_sim = -1.0;
    for (uint32_t c = 0; c < anchors.size(); ++c) {
      const double sim =
          ev.s_active.at(it->second, active_pos.at(anchors[c]));
      if (sim > best_sim) {
        best_sim = sim;
        best = c;
      }
    }
    lp.labels[e] = static_cast<int32_t>(best);
  }

  lp.weights = cluster_weights(ev, lp.labels, lp.n_clusters);
  fill_permutations(lp, ckpt);
  return lp;
}

// Number of distinct routing signatures: exact-duplicate logit columns have
// rescaled similarity exactly 1 and belong to one class.
size_t signature_classes(const Matrix& s_active) {
  const size_t n = s_active.rows();
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (s_active.at(i, j) >= 1.0 - 1e-12) parent[find(i)] = find(j);
    }
  }
  std::set<size_t> roots;
  for (size_t i = 0; i < n; ++i) roots.insert(find(i));
  return roots.size();
}

void validate_target(uint32_t d, uint32_t z, uint32_t layer_id) {
  if (d < 1) throw_validation("target expert count must be >= 1");
  if (d > z) {
    throw_validation("target expert count " + std::to_string(d) +
                     " exceeds the " + std::to_string(z) +
                     " experts of layer " + std::to_string(layer_id));
  }
}

}  // namespace

PlanResult uncurl_plan(const RouterTrace& trace, const SmoeCheckpoint& ckpt,
                       uint32_t d, Rng& rng, const ReduceOptions& options) {
  check_trace_matches(trace, ckpt);
  const auto moe_ids = sorted_moe_ids(ckpt);

  PlanResult result;
  result.plan.method = ReduceMethod::uncurl;
  result.plan.target = d;

  for (size_t li = 0; li < moe_ids.size(); ++li) {
    const uint32_t layer_id = moe_ids[li];
    if (options.skip_first_moe && li == 0) {
      result.plan.layers.push_back(skipped_layer_plan(ckpt, layer_id));
      continue;
    }
    LayerEvidence ev =
        gather_evidence(trace, layer_id, options.allow_degenerate);
    validate_target(d, ev.z, layer_id);
    if (ev.active.size() < d) {
      throw_validation("layer " + std::to_string(layer_id) + " has only " +
                       std::to_string(ev.active.size()) +
                       " non-degenerate experts, fewer than target " +
                       std::to_string(d));
    }
    if (!options.allow_degenerate && signature_classes(ev.s_active) < d) {
      throw Error(ErrorCategory::degenerate,
                  "layer " + std::to_string(layer_id) + " has only " +
                      std::to_string(signature_classes(ev.s_active)) +
                      " distinct router-logit signatures for target " +
                      std::to_string(d) +
                      "; duplicate experts cannot be separated (rerun with "
                      "--allow-degenerate to split them arbitrarily)");
    }

    SpectralEmbedding emb = spectral_embed(ev.s_active, d);
    const std::vector<uint32_t> active_labels = kmeans(emb.f, d, rng);

    LayerPlan lp;
    lp.layer_id = layer_id;
    lp.z = ev.z;
    lp.n_clusters = d;
    lp.labels.assign(ev.z, -1);
    for (size_t i = 0; i < ev.active.size(); ++i) {
      lp.labels[ev.active[i]] = static_cast<int32_t>(active_labels[i]);
    }

    // Reference: most frequently selected member of each cluster.
    lp.references.assign(d, 0);
    for (uint32_t c = 0; c < d; ++c) {
      uint32_t best = 0;
      uint64_t best_count = 0;
      bool found = false;
      for (uint32_t e : ev.active) {
        if (lp.labels[e] != static_cast<int32_t>(c)) continue;
        if (!found || ev.counts[e] > best_count) {
          best = e;
          best_count = ev.counts[e];
          found = true;
        }
      }
      lp.references[c] = best;
    }

    // Degenerate experts fold into the nearest cluster with zero weight.
    for (uint32_t e : ev.degenerate) {
      lp.labels[e] = static_cast<int32_t>(nearest_cluster_by_router(
          ckpt.layers[layer_id].ffn.router, e, lp.references));
    }

    lp.weights = cluster_weights(ev, lp.labels, d);
    fill_permutations(lp, ckpt);
    lp.disposition = RouterDisposition::reinitialize;
    result.plan.layers.push_back(std::move(lp));

    SimilarityLayerReport rep;
    rep.layer_id = layer_id;
    rep.s = full_similarity(ev);
    rep.f = Matrix(ev.z, d);
    for (size_t i = 0; i < ev.active.size(); ++i) {
      for (uint32_t j = 0; j < d; ++j) {
        rep.f.at(ev.active[i], j) = emb.f.at(i, j);
      }
    }
    rep.eigenvalues = emb.eigenvalues;
    result.report.layers.push_back(std::move(rep));
  }
  return result;
}

MergePlan freq_prune_plan(const RouterTrace& trace, const SmoeCheckpoint& ckpt,
                          uint32_t d, const ReduceOptions& options) {
  check_trace_matches(trace, ckpt);
  const auto moe_ids = sorted_moe_ids(ckpt);

  MergePlan plan;
  plan.method = ReduceMethod::freq_prune;
  plan.target = d;
  for (size_t li = 0; li < moe_ids.size(); ++li) {
    const uint32_t layer_id = moe_ids[li];
    if (options.skip_first_moe && li == 0) {
      plan.layers.push_back(skipped_layer_plan(ckpt, layer_id));
      continue;
    }
    const TraceLayer& tl = trace.layer(layer_id);
    validate_target(d, tl.z, layer_id);

    std::vector<uint32_t> all(tl.z);
    std::iota(all.begin(), all.end(), 0);
    std::vector<uint32_t> kept = ranked_by_count(tl.selection_counts, all);
    kept.resize(d);
    std::sort(kept.begin(), kept.end());

    LayerPlan lp;
    lp.layer_id = layer_id;
    lp.z = tl.z;
    lp.n_clusters = d;
    lp.labels.assign(tl.z, -1);
    lp.references = kept;
    lp.weights.assign(tl.z, 0.0);
    for (uint32_t c = 0; c < d; ++c) {
      lp.labels[kept[c]] = static_cast<int32_t>(c);
      lp.weights[kept[c]] = 1.0;
    }
    for (uint32_t e = 0; e < tl.z; ++e) {
      lp.permutations.push_back(identity_perm(ckpt.config.d_ff));
    }
    lp.disposition = RouterDisposition::keep_columns;
    plan.layers.push_back(std::move(lp));
  }
  return plan;
}

MergePlan freq_merge_plan(const RouterTrace& trace, const SmoeCheckpoint& ckpt,
                          uint32_t d, const ReduceOptions& options) {
  check_trace_matches(trace, ckpt);
  const auto moe_ids = sorted_moe_ids(ckpt);

  MergePlan plan;
  plan.method = ReduceMethod::freq_merge;
  plan.target = d;
  for (size_t li = 0; li < moe_ids.size(); ++li) {
    const uint32_t layer_id = moe_ids[li];
    if (options.skip_first_moe && li == 0) {
      plan.layers.push_back(skipped_layer_plan(ckpt, layer_id));
      continue;
    }
    LayerEvidence ev =
        gather_evidence(trace, layer_id, options.allow_degenerate);
    validate_target(d, ev.z, layer_id);
    if (ev.active.size() < d) {
      throw_validation("layer " + std::to_string(layer_id) + " has only " +
                       std::to_string(ev.active.size()) +
                       " non-degenerate experts, fewer than target " +
                       std::to_string(d));
    }
    std::vector<uint32_t> anchors = ranked_by_count(ev.counts, ev.active);
    anchors.resize(d);
    plan.layers.push_back(anchored_layer_plan(ev, ckpt, std::move(anchors)));
  }
  return plan;
}

MergePlan global_merge_plan(const RouterTrace& trace,
                            const SmoeCheckpoint& ckpt, uint32_t d_avg,
                            const ReduceOptions& options) {
  check_trace_matches(trace, ckpt);
  if (d_avg < 1) throw_validation("target expert count must be >= 1");
  const auto moe_ids = sorted_moe_ids(ckpt);

  // Layers the budget is spread over (a skipped first layer keeps its experts
  // and stays outside the budget).
  std::vector<uint32_t> planned_ids = moe_ids;
  if (options.skip_first_moe && !planned_ids.empty()) {
    planned_ids.erase(planned_ids.begin());
  }
  if (planned_ids.empty()) throw_validation("no moe layers to reduce");

  uint64_t total_experts = 0;
  std::map<uint32_t, LayerEvidence> evidence;
  for (uint32_t layer_id : planned_ids) {
    evidence.emplace(layer_id, gather_evidence(trace, layer_id,
                                               options.allow_degenerate));
    total_experts += evidence.at(layer_id).z;
  }
  const uint64_t budget =
      static_cast<uint64_t>(d_avg) * planned_ids.size();
  if (budget > total_experts) {
    throw_validation("budget " + std::to_string(budget) + " (d_avg " +
                     std::to_string(d_avg) + " x " +
                     std::to_string(planned_ids.size()) +
                     " layers) exceeds the " + std::to_string(total_experts) +
                     " experts available");
  }

  // Global ranking over candidate experts: count desc, then expert index,
  // then layer. Expert-major tie order spreads a flat ranking evenly over
  // layers instead of draining the budget into the first layer.
  struct Ranked {
    uint64_t count;
    uint32_t expert;
    uint32_t layer;
  };
  std::vector<Ranked> ranking;
  for (uint32_t layer_id : planned_ids) {
    const auto& ev = evidence.at(layer_id);
    for (uint32_t e : ev.active) {
      ranking.push_back({ev.counts[e], e, layer_id});
    }
  }
  if (budget > ranking.size()) {
    throw_validation("budget " + std::to_string(budget) +
                     " exceeds the " + std::to_string(ranking.size()) +
                     " non-degenerate experts available");
  }
  std::sort(ranking.begin(), ranking.end(), [](const Ranked& a, const Ranked& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.expert != b.expert) return a.expert < b.expert;
    return a.layer < b.layer;
  });

  std::vector<Ranked> dominant(ranking.begin(), ranking.begin() + budget);
  std::map<uint32_t, std::vector<uint32_t>> per_layer;
  for (const auto& r : dominant) per_layer[r.layer].push_back(r.expert);

  // Layers that received nothing promote their local top-1; the budget is
  // repaid by dropping the lowest-ranked dominant of a layer holding >= 2.
  for (uint32_t layer_id : planned_ids) {
    if (!per_layer[layer_id].empty()) continue;
    const auto& ev = evidence.at(layer_id);
    const uint32_t promoted = ranked_by_count(ev.counts, ev.active).front();
    for (size_t i = dominant.size(); i-- > 0;) {
      if (per_layer[dominant[i].layer].size() >= 2) {
        auto& v = per_layer[dominant[i].layer];
        v.erase(std::find(v.begin(), v.end(), dominant[i].expert));
        dominant.erase(dominant.begin() + i);
        break;
      }
    }
    per_layer[layer_id].push_back(promoted);
    dominant.push_back({ev.counts[promoted], promoted, layer_id});
  }

  MergePlan plan;
  plan.method = ReduceMethod::global_merge;
  plan.target = d_avg;
  for (size_t li = 0; li < moe_ids.size(); ++li) {
    const uint32_t layer_id = moe_ids[li];
    if (options.skip_first_moe && li == 0) {
      plan.layers.push_back(skipped_layer_plan(ckpt, layer_id));
      continue;
    }
    plan.layers.push_back(anchored_layer_plan(evidence.at(layer_id), ckpt,
                                              per_layer.at(layer_id)));
  }
  return plan;
}

SmoeCheckpoint apply_plan(const SmoeCheckpoint& ckpt, const MergePlan& plan,
                          Rng& rng) {
  const auto moe_ids = sorted_moe_ids(ckpt);
  if (plan.layers.size() != moe_ids.size()) {
    throw_validation("plan covers " + std::to_string(plan.layers.size()) +
                     " layers but the checkpoint has " +
                     std::to_string(moe_ids.size()) + " moe layers");
  }

  SmoeCheckpoint out = ckpt;
  for (size_t li = 0; li < plan.layers.size(); ++li) {
    const LayerPlan& lp = plan.layers[li];
    if (lp.layer_id != moe_ids[li]) {
      throw_validation("plan layer " + std::to_string(lp.layer_id) +
                       " does not match checkpoint moe layer " +
                       std::to_string(moe_ids[li]));
    }
    auto& block = out.layers[lp.layer_id].ffn;
    const uint32_t z = static_cast<uint32_t>(block.experts.size());
    if (lp.z != z || lp.labels.size() != z || lp.weights.size() != z ||
        lp.permutations.size() != z ||
        lp.references.size() != lp.n_clusters) {
      throw_validation("plan layer " + std::to_string(lp.layer_id) +
                       " does not match the checkpoint structure");
    }
    if (lp.skipped) continue;
    if (lp.n_clusters == 0) {
      throw_validation("plan layer " + std::to_string(lp.layer_id) +
                       " has no clusters");
    }

    const size_t d_ff = ckpt.config.d_ff;
    for (uint32_t e = 0; e < z; ++e) {
      if (lp.labels[e] < -1 ||
          lp.labels[e] >= static_cast<int32_t>(lp.n_clusters)) {
        throw_validation("plan layer " + std::to_string(lp.layer_id) +
                         ": label out of range for expert " + std::to_string(e));
      }
      if (lp.permutations[e].size() != d_ff) {
        throw_validation("plan layer " + std::to_string(lp.layer_id) +
                         ": permutation length mismatch for expert " +
                         std::to_string(e));
      }
      std::vector<uint8_t> seen(d_ff, 0);
      for (size_t v : lp.permutations[e]) {
        if (v >= d_ff || seen[v]) {
          throw_validation("plan layer " + std::to_string(lp.layer_id) +
                           ": permutation for expert " + std::to_string(e) +
                           " is not a bijection");
        }
        seen[v] = 1;
      }
    }
    for (uint32_t c = 0; c < lp.n_clusters; ++c) {
      const uint32_t ref = lp.references[c];
      if (ref >= z || lp.labels[ref] != static_cast<int32_t>(c)) {
        throw_validation("plan layer " + std::to_string(lp.layer_id) +
                         ": reference of cluster " + std::to_string(c) +
                         " is not a member of the cluster");
      }
      double sum = 0.0;
      bool any = false;
      for (uint32_t e = 0; e < z; ++e) {
        if (lp.labels[e] != static_cast<int32_t>(c)) continue;
        if (lp.weights[e] < 0.0) {
          throw_validation("plan layer " + std::to_string(lp.layer_id) +
                           ": negative merge weight for expert " +
                           std::to_string(e));
        }
        sum += lp.weights[e];
        any = true;
      }
      if (!any || std::fabs(sum - 1.0) > 1e-9) {
        throw_validation("plan layer " + std::to_string(lp.layer_id) +
                         ": merge weights of cluster " + std::to_string(c) +
                         " do not sum to 1");
      }
    }

    std::vector<ExpertWeights> merged;
    merged.reserve(lp.n_clusters);
    for (uint32_t c = 0; c < lp.n_clusters; ++c) {
      ExpertWeights acc;
      acc.w_in = Matrix(ckpt.config.d_ff, ckpt.config.d_model);
      acc.b_in = Vec(ckpt.config.d_ff, 0.0);
      acc.w_out = Matrix(ckpt.config.d_model, ckpt.config.d_ff);
      acc.b_out = Vec(ckpt.config.d_model, 0.0);
      for (uint32_t e = 0; e < z; ++e) {
        if (lp.labels[e] != static_cast<int32_t>(c) || lp.weights[e] == 0.0)
          continue;
        const double w = lp.weights[e];
        const ExpertWeights aligned =
            permute_expert(block.experts[e], lp.permutations[e]);
        for (size_t i = 0; i < acc.w_in.data().size(); ++i)
          acc.w_in.data()[i] += w * aligned.w_in.data()[i];
        for (size_t i = 0; i < acc.b_in.size(); ++i)
          acc.b_in[i] += w * aligned.b_in[i];
        for (size_t i = 0; i < acc.w_out.data().size(); ++i)
          acc.w_out.data()[i] += w * aligned.w_out.data()[i];
        for (size_t i = 0; i < acc.b_out.size(); ++i)
          acc.b_out[i] += w * aligned.b_out[i];
      }
      merged.push_back(std::move(acc));
    }

    Matrix new_router(ckpt.config.d_model, lp.n_clusters);
    if (lp.disposition == RouterDisposition::reinitialize) {
      for (double& v : new_router.data()) v = 0.02 * rng.next_gaussian();
    } else {
      for (uint32_t c = 0; c < lp.n_clusters; ++c) {
        for (size_t r = 0; r < new_router.rows(); ++r) {
          new_router.at(r, c) = block.router.w.at(r, lp.references[c]);
        }
      }
    }

    block.experts = std::move(merged);
    block.router.w = std::move(new_router);
  }

  out.config.n_experts = plan.target;
  out.validate();
  return out;
}

void export_clusters(const SimilarityReport& report, const MergePlan& plan,
                     const RouterTrace& trace, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCategory::io,
                "cannot create directory " + out_dir + ": " + ec.message());
  }

  for (const auto& rep : report.layers) {
    const LayerPlan* lp = nullptr;
    for (const auto& l : plan.layers) {
      if (l.layer_id == rep.layer_id) lp = &l;
    }
    if (!lp || lp->skipped) continue;

    const Vec freq = frequencies(trace, rep.layer_id).frequencies;
    const std::string path =
        out_dir + "/layer_" + std::to_string(rep.layer_id) + ".csv";
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) {
      throw Error(ErrorCategory::io, "cannot open " + path + " for writing");
    }
    std::fprintf(f, "expert");
    for (size_t j = 0; j < rep.f.cols(); ++j)
      std::fprintf(f, ",f%zu", j);
    std::fprintf(f, ",label,frequency\n");
    for (size_t e = 0; e < rep.f.rows(); ++e) {
      std::fprintf(f, "%zu", e);
      for (size_t j = 0; j < rep.f.cols(); ++j)
        std::fprintf(f, ",%.17g", rep.f.at(e, j));
      std::fprintf(f, ",%d,%.17g\n", lp->labels[e], freq[e]);
    }
    if (std::fclose(f) != 0) {
      throw Error(ErrorCategory::io, "failed to flush " + path);
    }
  }
}

}  // namespace smoekit
