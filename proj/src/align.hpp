#pragma once

#include "assignment.hpp"
#include "checkpoint.hpp"

namespace smoekit {

struct AlignResult {
  Assignment assignment;   // reference unit a <- other unit assignment.perm[a]
  ExpertWeights aligned;   // other's weights reordered; same function as other
};

// Permutation weight matching between two experts of one layer: maximizes
// sum_a <ref.w_in[a,:], other.w_in[perm[a],:]> +
//       <ref.w_out[:,a], other.w_out[:,perm[a]]>
// over permutations, then reorders other's w_in rows, b_in entries and w_out
// columns accordingly. Aligning never changes the expert's input-output map.
AlignResult align_experts(const ExpertWeights& reference,
                          const ExpertWeights& other);

}  // namespace smoekit
