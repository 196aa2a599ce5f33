#include "neuroflag/model/animator.hpp"

#include <cmath>

#include <fmt/format.h>

#include "neuroflag/error.hpp"
#include "neuroflag/tensor/ops.hpp"

namespace neuroflag::model {

namespace ops = tensor;
using tensor::BasicTensor;
using tensor::shape_str;

namespace {

template <typename T>
void require_finite(const BasicTensor<T>& x, const char* stage, int layer) {
  for (T v : x.data()) {
    if (!std::isfinite(v)) throw NumericFailureError(fmt::format("non-finite activation after {}", stage), layer);
  }
}

/// (B, H, rows, cols, C) -> (B, H, N, C); rank-4 input passes through.
template <typename T>
BasicTensor<T> as_token_history(const BasicTensor<T>& x) {
  if (x.rank() == 4) return x;
  if (x.rank() != 5) throw DimensionError("trajectory input must be rank 4 or 5, got " + shape_str(x.shape()));
  return ops::reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3), x.dim(4)});
}

}  // namespace

template <typename T>
BlockParams<T> BlockParams<T>::from(const ModelParams<T>& params, std::size_t layer) {
  const auto p = fmt::format("blocks.{}.", layer);
  const auto g = [&](const char* name) { return params.get(p + name); };
  BlockParams b;
  b.ln1_gamma = g("ln1.gamma");
  b.ln1_beta = g("ln1.beta");
  b.attn = AttentionParams<T>{g("attn.q.weight"), g("attn.q.bias"), g("attn.k.weight"), g("attn.k.bias"),
                              g("attn.v.weight"), g("attn.v.bias"), g("attn.o.weight"), g("attn.o.bias")};
  b.ln2_gamma = g("ln2.gamma");
  b.ln2_beta = g("ln2.beta");
  b.fc1_w = g("mlp.fc1.weight");
  b.fc1_b = g("mlp.fc1.bias");
  b.fc2_w = g("mlp.fc2.weight");
  b.fc2_b = g("mlp.fc2.bias");
  return b;
}

template <typename T>
BasicTensor<T> trajectory_embed(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  const auto h = as_token_history(x);
  const std::size_t batch = h.dim(0), hist = h.dim(1), tokens = h.dim(2), coords = h.dim(3);
  if (weight.rank() != 2 || weight.dim(0) != hist * coords) {
    throw DimensionError(fmt::format("trajectory_embed: input {} does not match weight {}", shape_str(x.shape()),
                                     shape_str(weight.shape())));
  }
  const auto per_token = ops::permute(h, {0, 2, 1, 3});
  const auto flat = ops::reshape(per_token, {batch, tokens, hist * coords});
  return ops::dense(flat, weight, bias);
}

template <typename T>
BasicTensor<T> positional_encode(const BasicTensor<T>& e, const BasicTensor<T>& table) {
  return ops::add_bias(e, table);
}

template <typename T>
BasicTensor<T> multi_head_attention(const BasicTensor<T>& x, const AttentionParams<T>& p, std::size_t num_heads,
                                    double dropout_rate, const ForwardOptions& opts) {
  if (x.rank() != 3) throw DimensionError("multi_head_attention expects (B, N, d), got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0), tokens = x.dim(1), d = x.dim(2);
  if (num_heads == 0 || d % num_heads != 0) {
    throw DimensionError(fmt::format("width {} is not divisible by {} heads", d, num_heads));
  }
  const std::size_t kd = d / num_heads;
  const auto heads = [&](const BasicTensor<T>& w, const BasicTensor<T>& b) {
    return ops::permute(ops::reshape(ops::dense(x, w, b), {batch, tokens, num_heads, kd}), {0, 2, 1, 3});
  };
  const auto q = heads(p.wq, p.bq);
  const auto k = heads(p.wk, p.bk);
  const auto v = heads(p.wv, p.bv);

  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(kd)));
  auto weights = ops::softmax(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt), -1);
  if (opts.training && dropout_rate > 0.0) {
    if (opts.rng == nullptr) throw UsageError("training-mode attention dropout needs an Rng");
    weights = ops::dropout(weights, dropout_rate, true, *opts.rng);
  }
  const auto context = ops::matmul(weights, v);
  const auto merged = ops::reshape(ops::permute(context, {0, 2, 1, 3}), {batch, tokens, d});
  return ops::dense(merged, p.wo, p.bo);
}

template <typename T>
BasicTensor<T> transformer_block(const BasicTensor<T>& x, const BlockParams<T>& p, const ModelConfig& cfg,
                                 const ForwardOptions& opts) {
  const T eps = static_cast<T>(cfg.layer_norm_eps);
  const auto x1 = ops::layer_norm(x, p.ln1_gamma, p.ln1_beta, eps);
  const auto attn = multi_head_attention(x1, p.attn, cfg.num_heads, cfg.dropout_rate, opts);
  const auto x2 = ops::add(attn, x);
  const auto x3 = ops::layer_norm(x2, p.ln2_gamma, p.ln2_beta, eps);
  const auto hidden = ops::gelu(ops::dense(x3, p.fc1_w, p.fc1_b));
  const auto mlp = ops::gelu(ops::dense(hidden, p.fc2_w, p.fc2_b));
  return ops::add(mlp, x2);
}

template <typename T>
BasicTensor<T> encode(const ModelParams<T>& params, const ModelConfig& cfg, const BasicTensor<T>& x,
                      const ForwardOptions& opts) {
  const auto h = as_token_history(x);
  if (h.dim(1) != cfg.history_len || h.dim(2) != cfg.num_patches() || h.dim(3) != cfg.coords) {
    throw DimensionError(fmt::format("model expects (B, {}, {}, {}, {}), got {}", cfg.history_len, cfg.grid_rows,
                                     cfg.grid_cols, cfg.coords, shape_str(x.shape())));
  }
  auto z = trajectory_embed(h, params.get("embed.weight"), params.get("embed.bias"));
  z = positional_encode(z, params.get("pos_table"));
  require_finite(z, "embedding", -1);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    z = transformer_block(z, BlockParams<T>::from(params, l), cfg, opts);
    require_finite(z, "transformer block", static_cast<int>(l));
  }
  return ops::layer_norm(z, params.get("final_ln.gamma"), params.get("final_ln.beta"),
                         static_cast<T>(cfg.layer_norm_eps));
}

template <typename T>
BasicTensor<T> forward(const ModelParams<T>& params, const ModelConfig& cfg, const BasicTensor<T>& x,
                       const ForwardOptions& opts) {
  const auto rep = encode(params, cfg, x, opts);
  const auto pooled = ops::mean_pool(rep);
  const auto out = ops::dense(pooled, params.get("head.weight"), params.get("head.bias"));
  require_finite(out, "output head", static_cast<int>(cfg.num_layers));
  return ops::reshape(out, {x.dim(0), 1, cfg.grid_rows, cfg.grid_cols, cfg.coords});
}

#define NEUROFLAG_INSTANTIATE_MODEL(T)                                                                             \
  template struct BlockParams<T>;                                                                                  \
  template BasicTensor<T> trajectory_embed(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> positional_encode(const BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> multi_head_attention(const BasicTensor<T>&, const AttentionParams<T>&, std::size_t,    \
                                               double, const ForwardOptions&);                                   \
  template BasicTensor<T> transformer_block(const BasicTensor<T>&, const BlockParams<T>&, const ModelConfig&,    \
                                            const ForwardOptions&);                                              \
  template BasicTensor<T> encode(const ModelParams<T>&, const ModelConfig&, const BasicTensor<T>&,               \
                                 const ForwardOptions&);                                                         \
  template BasicTensor<T> forward(const ModelParams<T>&, const ModelConfig&, const BasicTensor<T>&,              \
                                  const ForwardOptions&);

NEUROFLAG_INSTANTIATE_MODEL(float)
NEUROFLAG_INSTANTIATE_MODEL(double)

}  // namespace neuroflag::model
