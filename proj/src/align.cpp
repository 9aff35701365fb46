#include "align.hpp"

#include "error.hpp"

namespace smoekit {

AlignResult align_experts(const ExpertWeights& reference,
                          const ExpertWeights& other) {
  if (!reference.w_in.same_shape(other.w_in) ||
      !reference.w_out.same_shape(other.w_out) ||
      reference.b_in.size() != other.b_in.size() ||
      reference.b_out.size() != other.b_out.size()) {
    throw_validation("align_experts: expert shapes do not match");
  }
  const size_t d_ff = reference.w_in.rows();
  const size_t d_model = reference.w_in.cols();

  Matrix cost(d_ff, d_ff);
  for (size_t a = 0; a < d_ff; ++a) {
    for (size_t b = 0; b < d_ff; ++b) {
      double c = dot(reference.w_in.row(a), other.w_in.row(b));
      for (size_t r = 0; r < d_model; ++r) {
        c += reference.w_out.at(r, a) * other.w_out.at(r, b);
      }
      cost.at(a, b) = c;
    }
  }

  AlignResult result;
  result.assignment = linear_assignment_max(cost);
  result.aligned = permute_expert(other, result.assignment.perm);
  return result;
}

}  // namespace smoekit
