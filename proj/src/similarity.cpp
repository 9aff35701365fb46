#include "similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cosine.hpp"
#include "error.hpp"
#include "sym_eigen.hpp"

namespace smoekit {

Matrix trace_logits_matrix(const TraceLayer& layer) {
  const size_t n = layer.logits.size() / layer.z;
  Matrix h(n, layer.z);
  for (size_t i = 0; i < layer.logits.size(); ++i) {
    h.data()[i] = static_cast<double>(layer.logits[i]);
  }
  return h;
}

std::vector<uint32_t> degenerate_columns(const Matrix& h) {
  std::vector<uint32_t> out;
  for (size_t j = 0; j < h.cols(); ++j) {
    double s = 0.0;
    for (size_t i = 0; i < h.rows(); ++i) s += h.at(i, j) * h.at(i, j);
    if (s == 0.0) out.push_back(static_cast<uint32_t>(j));
  }
  return out;
}

std::vector<uint32_t> constant_columns(const Matrix& h) {
  std::vector<uint32_t> out;
  for (size_t j = 0; j < h.cols(); ++j) {
    bool constant = true;
    for (size_t i = 1; i < h.rows(); ++i) {
      if (h.at(i, j) != h.at(0, j)) {
        constant = false;
        break;
      }
    }
    if (constant) out.push_back(static_cast<uint32_t>(j));
  }
  return out;
}

Matrix similarity(const RouterTrace& trace, uint32_t layer_id) {
  const Matrix h = trace_logits_matrix(trace.layer(layer_id));
  const auto degenerate = degenerate_columns(h);
  if (!degenerate.empty()) {
    throw Error(ErrorCategory::degenerate,
                "layer " + std::to_string(layer_id) + " expert " +
                    std::to_string(degenerate.front()) +
                    " has a zero-norm logit column (never influenced by the "
                    "router on this data)");
  }
  Matrix s = cosine_columns(h);
  for (size_t i = 0; i < s.rows(); ++i) {
    for (size_t j = 0; j < s.cols(); ++j) {
      s.at(i, j) = std::clamp(0.5 * (1.0 + s.at(i, j)), 0.0, 1.0);
    }
    s.at(i, i) = 1.0;
  }
  return s;
}

SpectralEmbedding spectral_embed(const Matrix& s, size_t d) {
  const size_t z = s.rows();
  if (z == 0 || s.cols() != z) {
    throw_validation("spectral_embed requires a square similarity matrix");
  }
  if (d < 1 || d > z) {
    throw_validation("spectral_embed: d must be in [1, " + std::to_string(z) +
                     "], got " + std::to_string(d));
  }

  Vec inv_sqrt_deg(z);
  for (size_t i = 0; i < z; ++i) {
    double deg = 0.0;
    for (size_t j = 0; j < z; ++j) deg += s.at(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Matrix lap(z, z);
  for (size_t i = 0; i < z; ++i) {
    for (size_t j = 0; j < z; ++j) {
      lap.at(i, j) = (i == j ? 1.0 : 0.0) -
                     inv_sqrt_deg[i] * s.at(i, j) * inv_sqrt_deg[j];
    }
  }

  EigenResult eig = sym_eigen(lap, d);

  SpectralEmbedding out;
  out.f = std::move(eig.vectors);
  out.eigenvalues = std::move(eig.values);
  out.zero_rows.assign(z, 0);
  for (size_t i = 0; i < z; ++i) {
    const double n = norm2(out.f.row(i));
    if (n == 0.0) {
      out.zero_rows[i] = 1;
      continue;
    }
    for (size_t j = 0; j < d; ++j) out.f.at(i, j) /= n;
  }
  return out;
}

}  // namespace smoekit
