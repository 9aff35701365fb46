#include "forward.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace smoekit {

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double x) {
  // tanh approximation, as in the GPT2 family.
  const double c = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

Vec layernorm(std::span<const double> x, const LayerNormParams& p) {
  const size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + kLnEps);
  Vec y(n);
  for (size_t i = 0; i < n; ++i) y[i] = p.gamma[i] * (x[i] - mean) * inv + p.beta[i];
  return y;
}

Vec affine(const Matrix& w, const Vec& b, std::span<const double> x) {
  Vec y = matvec(w, x);
  for (size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

// Causal multi-head self-attention over one sequence (rows of xs).
Matrix attention(const AttentionWeights& a, const Matrix& xs, size_t n_heads) {
  const size_t seq = xs.rows();
  const size_t d = xs.cols();
  const size_t hd = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Matrix q(seq, d), k(seq, d), v(seq, d);
  for (size_t t = 0; t < seq; ++t) {
    Vec qt = affine(a.wq, a.bq, xs.row(t));
    Vec kt = affine(a.wk, a.bk, xs.row(t));
    Vec vt = affine(a.wv, a.bv, xs.row(t));
    for (size_t i = 0; i < d; ++i) {
      q.at(t, i) = qt[i];
      k.at(t, i) = kt[i];
      v.at(t, i) = vt[i];
    }
  }

  Matrix ctx(seq, d);
  Vec scores;
  for (size_t h = 0; h < n_heads; ++h) {
    const size_t off = h * hd;
    for (size_t t = 0; t < seq; ++t) {
      scores.assign(t + 1, 0.0);
      double max_score = -1e300;
      for (size_t s = 0; s <= t; ++s) {
        double sc = 0.0;
        for (size_t i = 0; i < hd; ++i) sc += q.at(t, off + i) * k.at(s, off + i);
        sc *= scale;
        scores[s] = sc;
        if (sc > max_score) max_score = sc;
      }
      double denom = 0.0;
      for (size_t s = 0; s <= t; ++s) {
        scores[s] = std::exp(scores[s] - max_score);
        denom += scores[s];
      }
      for (size_t s = 0; s <= t; ++s) {
        const double p = scores[s] / denom;
        for (size_t i = 0; i < hd; ++i) ctx.at(t, off + i) += p * v.at(s, off + i);
      }
    }
  }

  Matrix out(seq, d);
  for (size_t t = 0; t < seq; ++t) {
    Vec o = affine(a.wo, a.bo, ctx.row(t));
    for (size_t i = 0; i < d; ++i) out.at(t, i) = o[i];
  }
  return out;
}

}  // namespace

Vec gate_values(const RouterWeights& router, std::span<const double> x) {
  if (router.w.rows() != x.size()) {
    throw_validation("gate_values: input dim " + std::to_string(x.size()) +
                     " does not match router rows " +
                     std::to_string(router.w.rows()));
  }
  const size_t m = router.w.cols();
  Vec logits(m, 0.0);
  for (size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += router.w.at(i, j) * x[i];
    logits[j] = s;
  }
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  double denom = 0.0;
  for (size_t j = 0; j < m; ++j) {
    logits[j] = std::exp(logits[j] - max_logit);
    denom += logits[j];
  }
  for (double& v : logits) v /= denom;
  return logits;
}

Vec expert_apply(const ExpertWeights& e, std::span<const double> x) {
  Vec h = affine(e.w_in, e.b_in, x);
  for (double& v : h) v = gelu(v);
  return affine(e.w_out, e.b_out, h);
}

std::pair<Matrix, MoeLayerStats> moe_layer_forward(const FfnBlock& block,
                                                   const Matrix& xs,
                                                   double capacity_factor,
                                                   uint32_t min_capacity) {
  if (!block.is_moe) {
    throw_validation("moe_layer_forward called on a dense FFN block");
  }
  const size_t tokens = xs.rows();
  const size_t m = block.experts.size();

  MoeLayerStats stats;
  stats.logits = Matrix(tokens, m);
  stats.selected.resize(tokens);
  stats.dropped.assign(tokens, 0);
  stats.dispatch_counts.assign(m, 0);
  stats.gate_sums.assign(m, 0.0);

  const uint64_t capacity = std::max<uint64_t>(
      min_capacity,
      static_cast<uint64_t>(std::ceil(capacity_factor *
                                      static_cast<double>(tokens) /
                                      static_cast<double>(m))));

  Matrix out(tokens, xs.cols());
  for (size_t t = 0; t < tokens; ++t) {
    const auto x = xs.row(t);
    // Raw logits, kept pre-softmax for tracing.
    double max_logit = -1e300;
    for (size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (size_t i = 0; i < x.size(); ++i) s += block.router.w.at(i, j) * x[i];
      stats.logits.at(t, j) = s;
      if (s > max_logit) max_logit = s;
    }
    double denom = 0.0;
    Vec gates(m);
    for (size_t j = 0; j < m; ++j) {
      gates[j] = std::exp(stats.logits.at(t, j) - max_logit);
      denom += gates[j];
    }
    uint32_t best = 0;
    for (size_t j = 0; j < m; ++j) {
      gates[j] /= denom;
      stats.gate_sums[j] += gates[j];
      if (gates[j] > gates[best]) best = static_cast<uint32_t>(j);
    }
    stats.selected[t] = best;

    if (stats.dispatch_counts[best] < capacity) {
      ++stats.dispatch_counts[best];
      Vec y = expert_apply(block.experts[best], x);
      for (size_t i = 0; i < y.size(); ++i) out.at(t, i) = gates[best] * y[i];
    } else {
      stats.dropped[t] = 1;
      ++stats.dropped_count;
    }
  }
  return {std::move(out), std::move(stats)};
}

ForwardResult model_forward(const SmoeCheckpoint& ckpt,
                            std::span<const uint32_t> token_ids, size_t batch,
                            size_t seq, ForwardMode mode) {
  const auto& cfg = ckpt.config;
  if (batch < 1 || seq < 1) {
    throw_validation("model_forward: batch and seq must be >= 1");
  }
  if (seq > cfg.context_length) {
    throw_validation("model_forward: seq " + std::to_string(seq) +
                     " exceeds context length " +
                     std::to_string(cfg.context_length));
  }
  if (token_ids.size() != batch * seq) {
    throw_validation("model_forward: expected " + std::to_string(batch * seq) +
                     " token ids, got " + std::to_string(token_ids.size()));
  }
  for (uint32_t id : token_ids) {
    if (id >= cfg.vocab_size) {
      throw_validation("model_forward: token id " + std::to_string(id) +
                       " out of range for vocab " +
                       std::to_string(cfg.vocab_size));
    }
  }

  const size_t tokens = batch * seq;
  const double cf = mode == ForwardMode::train ? cfg.train_capacity_factor
                                               : cfg.eval_capacity_factor;

  Matrix x(tokens, cfg.d_model);
  for (size_t b = 0; b < batch; ++b) {
    for (size_t t = 0; t < seq; ++t) {
      const size_t row = b * seq + t;
      const uint32_t id = token_ids[row];
      for (size_t i = 0; i < cfg.d_model; ++i) {
        x.at(row, i) = ckpt.token_embedding.at(id, i) +
                       ckpt.position_embedding.at(t, i);
      }
    }
  }

  ForwardResult result;
  for (uint32_t l = 0; l < cfg.n_layers; ++l) {
    const auto& layer = ckpt.layers[l];

    // Attention sublayer (per sequence).
    for (size_t b = 0; b < batch; ++b) {
      Matrix ys(seq, cfg.d_model);
      for (size_t t = 0; t < seq; ++t) {
        Vec y = layernorm(x.row(b * seq + t), layer.ln1);
        for (size_t i = 0; i < cfg.d_model; ++i) ys.at(t, i) = y[i];
      }
      Matrix attn_out = attention(layer.attn, ys, cfg.n_heads);
      for (size_t t = 0; t < seq; ++t) {
        for (size_t i = 0; i < cfg.d_model; ++i)
          x.at(b * seq + t, i) += attn_out.at(t, i);
      }
    }

    // FFN / MoE sublayer over the flattened batch.
    Matrix ys(tokens, cfg.d_model);
    for (size_t t = 0; t < tokens; ++t) {
      Vec y = layernorm(x.row(t), layer.ln2);
      for (size_t i = 0; i < cfg.d_model; ++i) ys.at(t, i) = y[i];
    }
    if (layer.ffn.is_moe) {
      auto [out, stats] =
          moe_layer_forward(layer.ffn, ys, cf, cfg.min_expert_capacity);
      stats.layer_id = l;
      for (size_t t = 0; t < tokens; ++t)
        for (size_t i = 0; i < cfg.d_model; ++i) x.at(t, i) += out.at(t, i);
      result.stats.moe_layers.push_back(std::move(stats));
    } else {
      for (size_t t = 0; t < tokens; ++t) {
        Vec y = expert_apply(layer.ffn.dense, ys.row(t));
        for (size_t i = 0; i < cfg.d_model; ++i) x.at(t, i) += y[i];
      }
    }
  }

  result.logits = Matrix(tokens, cfg.vocab_size);
  for (size_t t = 0; t < tokens; ++t) {
    Vec y = layernorm(x.row(t), ckpt.ln_f);
    for (size_t v = 0; v < cfg.vocab_size; ++v) {
      result.logits.at(t, v) = dot(ckpt.token_embedding.row(v), y);
    }
  }
  result.stats.load_balance_loss = load_balance_loss(result.stats, cfg.alpha);
  return result;
}

double load_balance_loss(const ForwardStats& stats, double alpha) {
  double total = 0.0;
  for (const auto& layer : stats.moe_layers) {
    const size_t tokens = layer.selected.size();
    const size_t m = layer.gate_sums.size();
    if (tokens == 0) continue;
    std::vector<uint64_t> argmax_counts(m, 0);
    for (uint32_t s : layer.selected) ++argmax_counts[s];
    double layer_loss = 0.0;
    for (size_t i = 0; i < m; ++i) {
      const double f = static_cast<double>(argmax_counts[i]) /
                       static_cast<double>(tokens);
      const double p = layer.gate_sums[i] / static_cast<double>(tokens);
      layer_loss += f * p;
    }
    total += alpha * layer_loss;
  }
  return total;
}

double evaluate_nll(const SmoeCheckpoint& ckpt,
                    std::span<const uint32_t> stream, size_t batch,
                    size_t seq) {
  if (batch < 1 || seq < 1) {
    throw_validation("evaluate_nll: batch and seq must be >= 1");
  }
  if (stream.size() < seq + 1) {
    throw_validation("evaluate_nll: stream of " + std::to_string(stream.size()) +
                     " tokens is shorter than seq+1 = " +
                     std::to_string(seq + 1));
  }
  const size_t window = seq + 1;
  const size_t n_windows = stream.size() / window;

  double nll_sum = 0.0;
  size_t n_positions = 0;
  std::vector<uint32_t> inputs;
  for (size_t w0 = 0; w0 < n_windows; w0 += batch) {
    const size_t nb = std::min(batch, n_windows - w0);
    inputs.assign(nb * seq, 0);
    for (size_t b = 0; b < nb; ++b) {
      const uint32_t* w = stream.data() + (w0 + b) * window;
      for (size_t t = 0; t < seq; ++t) inputs[b * seq + t] = w[t];
    }
    ForwardResult fr = model_forward(ckpt, inputs, nb, seq, ForwardMode::eval);
    for (size_t b = 0; b < nb; ++b) {
      const uint32_t* w = stream.data() + (w0 + b) * window;
      for (size_t t = 0; t < seq; ++t) {
        const auto row = fr.logits.row(b * seq + t);
        double max_logit = row[0];
        for (double v : row) max_logit = std::max(max_logit, v);
        double denom = 0.0;
        for (double v : row) denom += std::exp(v - max_logit);
        const uint32_t target = w[t + 1];
        nll_sum += max_logit + std::log(denom) - row[target];
        ++n_positions;
      }
    }
  }
  return nll_sum / static_cast<double>(n_positions);
}

}  // namespace smoekit
