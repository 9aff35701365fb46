#include "checkpoint.hpp"

#include <numeric>
#include <string>

#include "error.hpp"

namespace smoekit {

namespace {

constexpr double kInitStd = 0.02;

Matrix gaussian_matrix(size_t rows, size_t cols, double std, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = std * rng.next_gaussian();
  return m;
}

LayerNormParams make_layernorm(size_t dim) {
  return {Vec(dim, 1.0), Vec(dim, 0.0)};
}

AttentionWeights make_attention(uint32_t d, Rng& rng) {
  AttentionWeights a;
  a.wq = gaussian_matrix(d, d, kInitStd, rng);
  a.wk = gaussian_matrix(d, d, kInitStd, rng);
  a.wv = gaussian_matrix(d, d, kInitStd, rng);
  a.wo = gaussian_matrix(d, d, kInitStd, rng);
  a.bq = Vec(d, 0.0);
  a.bk = Vec(d, 0.0);
  a.bv = Vec(d, 0.0);
  a.bo = Vec(d, 0.0);
  return a;
}

ExpertWeights make_expert(uint32_t d_model, uint32_t d_ff, Rng& rng) {
  ExpertWeights e;
  e.w_in = gaussian_matrix(d_ff, d_model, kInitStd, rng);
  e.b_in = Vec(d_ff, 0.0);
  e.w_out = gaussian_matrix(d_model, d_ff, kInitStd, rng);
  e.b_out = Vec(d_model, 0.0);
  return e;
}

void add_noise(Matrix& m, double std, Rng& rng) {
  if (std == 0.0) return;
  for (double& v : m.data()) v += std * rng.next_gaussian();
}

void add_noise(Vec& v, double std, Rng& rng) {
  if (std == 0.0) return;
  for (double& x : v) x += std * rng.next_gaussian();
}

std::vector<size_t> random_permutation(size_t n, Rng& rng) {
  std::vector<size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (size_t i = n; i-- > 1;) {
    const size_t j = static_cast<size_t>(rng.next_below(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

void check_expert_shape(const ExpertWeights& e, uint32_t d_model, uint32_t d_ff,
                        const std::string& where) {
  if (e.w_in.rows() != d_ff || e.w_in.cols() != d_model ||
      e.b_in.size() != d_ff || e.w_out.rows() != d_model ||
      e.w_out.cols() != d_ff || e.b_out.size() != d_model) {
    throw_validation("checkpoint: expert tensor shape mismatch at " + where);
  }
}

}  // namespace

void SmoeCheckpoint::validate() const {
  config.validate();
  if (token_embedding.rows() != config.vocab_size ||
      token_embedding.cols() != config.d_model) {
    throw_validation("checkpoint: token embedding shape mismatch");
  }
  if (position_embedding.rows() != config.context_length ||
      position_embedding.cols() != config.d_model) {
    throw_validation("checkpoint: position embedding shape mismatch");
  }
  if (layers.size() != config.n_layers) {
    throw_validation("checkpoint: expected " + std::to_string(config.n_layers) +
                     " layers, found " + std::to_string(layers.size()));
  }
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string where = "layer " + std::to_string(l);
    if (layer.ln1.gamma.size() != config.d_model ||
        layer.ln2.gamma.size() != config.d_model) {
      throw_validation("checkpoint: layernorm shape mismatch at " + where);
    }
    const bool want_moe = config.is_moe_layer(static_cast<uint32_t>(l));
    if (layer.ffn.is_moe != want_moe) {
      throw_validation("checkpoint: moe/dense layout mismatch at " + where);
    }
    if (layer.ffn.is_moe) {
      if (layer.ffn.experts.empty()) {
        throw_validation("checkpoint: moe layer without experts at " + where);
      }
      if (layer.ffn.router.w.rows() != config.d_model ||
          layer.ffn.router.w.cols() != layer.ffn.experts.size()) {
        throw_validation("checkpoint: router shape mismatch at " + where);
      }
      for (size_t e = 0; e < layer.ffn.experts.size(); ++e) {
        check_expert_shape(layer.ffn.experts[e], config.d_model, config.d_ff,
                           where + " expert " + std::to_string(e));
      }
    } else {
      check_expert_shape(layer.ffn.dense, config.d_model, config.d_ff, where);
    }
  }
  if (ln_f.gamma.size() != config.d_model) {
    throw_validation("checkpoint: final layernorm shape mismatch");
  }
}

SmoeCheckpoint init_random(const ModelConfig& config, Rng& rng) {
  config.validate();
  SmoeCheckpoint ckpt;
  ckpt.config = config;
  ckpt.token_embedding =
      gaussian_matrix(config.vocab_size, config.d_model, kInitStd, rng);
  ckpt.position_embedding =
      gaussian_matrix(config.context_length, config.d_model, kInitStd, rng);
  ckpt.layers.resize(config.n_layers);
  for (uint32_t l = 0; l < config.n_layers; ++l) {
    auto& layer = ckpt.layers[l];
    layer.ln1 = make_layernorm(config.d_model);
    layer.attn = make_attention(config.d_model, rng);
    layer.ln2 = make_layernorm(config.d_model);
    if (config.is_moe_layer(l)) {
      layer.ffn.is_moe = true;
      layer.ffn.experts.reserve(config.n_experts);
      for (uint32_t e = 0; e < config.n_experts; ++e) {
        layer.ffn.experts.push_back(make_expert(config.d_model, config.d_ff, rng));
      }
      layer.ffn.router.w =
          gaussian_matrix(config.d_model, config.n_experts, kInitStd, rng);
    } else {
      layer.ffn.dense = make_expert(config.d_model, config.d_ff, rng);
    }
  }
  ckpt.ln_f = make_layernorm(config.d_model);
  return ckpt;
}

ExpertWeights permute_expert(const ExpertWeights& e,
                             const std::vector<size_t>& perm) {
  const size_t d_ff = e.w_in.rows();
  if (perm.size() != d_ff) {
    throw_validation("permute_expert: permutation length " +
                     std::to_string(perm.size()) + " does not match d_ff " +
                     std::to_string(d_ff));
  }
  ExpertWeights out;
  out.w_in = Matrix(e.w_in.rows(), e.w_in.cols());
  out.b_in = Vec(d_ff);
  out.w_out = Matrix(e.w_out.rows(), e.w_out.cols());
  out.b_out = e.b_out;
  for (size_t i = 0; i < d_ff; ++i) {
    const size_t src = perm[i];
    for (size_t c = 0; c < e.w_in.cols(); ++c)
      out.w_in.at(i, c) = e.w_in.at(src, c);
    out.b_in[i] = e.b_in[src];
    for (size_t r = 0; r < e.w_out.rows(); ++r)
      out.w_out.at(r, i) = e.w_out.at(r, src);
  }
  return out;
}

PlantedModel init_planted(const ModelConfig& config, uint32_t n_groups,
                          double noise_std, Rng& rng) {
  config.validate();
  if (n_groups == 0 || config.n_experts % n_groups != 0) {
    throw_validation("init_planted: n_groups (" + std::to_string(n_groups) +
                     ") must divide n_experts (" +
                     std::to_string(config.n_experts) + ")");
  }
  const uint32_t group_size = config.n_experts / n_groups;

  PlantedModel result;
  result.checkpoint.config = config;
  auto& ckpt = result.checkpoint;
  ckpt.token_embedding =
      gaussian_matrix(config.vocab_size, config.d_model, kInitStd, rng);
  ckpt.position_embedding =
      gaussian_matrix(config.context_length, config.d_model, kInitStd, rng);
  ckpt.layers.resize(config.n_layers);
  for (uint32_t l = 0; l < config.n_layers; ++l) {
    auto& layer = ckpt.layers[l];
    layer.ln1 = make_layernorm(config.d_model);
    layer.attn = make_attention(config.d_model, rng);
    layer.ln2 = make_layernorm(config.d_model);
    if (!config.is_moe_layer(l)) {
      layer.ffn.dense = make_expert(config.d_model, config.d_ff, rng);
      continue;
    }
    layer.ffn.is_moe = true;

    std::vector<ExpertWeights> bases;
    bases.reserve(n_groups);
    Matrix router_bases(config.d_model, n_groups);
    for (uint32_t g = 0; g < n_groups; ++g) {
      bases.push_back(make_expert(config.d_model, config.d_ff, rng));
      for (uint32_t r = 0; r < config.d_model; ++r)
        router_bases.at(r, g) = kInitStd * rng.next_gaussian();
    }

    layer.ffn.router.w = Matrix(config.d_model, config.n_experts);
    std::vector<uint32_t> labels(config.n_experts);
    for (uint32_t e = 0; e < config.n_experts; ++e) {
      const uint32_t g = e / group_size;
      labels[e] = g;
      ExpertWeights member =
          permute_expert(bases[g], random_permutation(config.d_ff, rng));
      add_noise(member.w_in, noise_std, rng);
      add_noise(member.b_in, noise_std, rng);
      add_noise(member.w_out, noise_std, rng);
      add_noise(member.b_out, noise_std, rng);
      layer.ffn.experts.push_back(std::move(member));

      Vec col = router_bases.col(g);
      add_noise(col, noise_std, rng);
      layer.ffn.router.w.set_col(e, col);
    }
    result.labels.push_back(std::move(labels));
  }
  ckpt.ln_f = make_layernorm(config.d_model);
  return result;
}

}  // namespace smoekit
