#pragma once

#include <cstdint>
#include <vector>

#include "matrix.hpp"
#include "trace.hpp"

namespace smoekit {

// The trace layer's logits as an n_positions x z double matrix.
Matrix trace_logits_matrix(const TraceLayer& layer);

// Indices of zero-norm columns (experts the router never responded to).
std::vector<uint32_t> degenerate_columns(const Matrix& h);

// Indices of constant columns (zero logit variance; no per-token routing
// signal). Zero-norm columns are a special case.
std::vector<uint32_t> constant_columns(const Matrix& h);

// Rescaled router-logit similarity S = (1 + cos)/2, symmetric, unit diagonal,
// entries in [0, 1]. A zero-norm logit column raises a degenerate error naming
// layer and expert.
Matrix similarity(const RouterTrace& trace, uint32_t layer_id);

struct SpectralEmbedding {
  Matrix f;          // z x d, rows normalized to unit length (zero rows kept)
  Vec eigenvalues;   // the d smallest eigenvalues of the normalized Laplacian
  std::vector<uint8_t> zero_rows;
};

// Eigenvectors of the d smallest eigenvalues of the symmetric normalized
// Laplacian L = I - Deg^{-1/2} S Deg^{-1/2}, rows normalized to unit length.
SpectralEmbedding spectral_embed(const Matrix& s, size_t d);

}  // namespace smoekit
