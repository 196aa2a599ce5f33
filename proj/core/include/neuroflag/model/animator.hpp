#pragma once

#include <cstddef>

#include "neuroflag/model/config.hpp"
#include "neuroflag/model/params.hpp"
#include "neuroflag/rng.hpp"
#include "neuroflag/tensor/tensor.hpp"

// Trajectory transformer: each of the grid's particles is one token holding its
// full history. Shapes use B for batch, H for history length, N for tokens and
// d for the projection width.
namespace neuroflag::model {

struct ForwardOptions {
  /// Enables attention dropout; requires `rng` when the rate is non-zero.
  bool training = false;
  Rng* rng = nullptr;
};

template <typename T>
struct AttentionParams {
  tensor::BasicTensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct BlockParams {
  tensor::BasicTensor<T> ln1_gamma, ln1_beta;
  AttentionParams<T> attn;
  tensor::BasicTensor<T> ln2_gamma, ln2_beta;
  tensor::BasicTensor<T> fc1_w, fc1_b, fc2_w, fc2_b;

  static BlockParams from(const ModelParams<T>& params, std::size_t layer);
};

/// (B, H, N, C) or (B, H, rows, cols, C) -> (B, N, d). Each token's history is
/// flattened time-major (t0.xyz, t1.xyz, ...) before the affine map.
template <typename T>
tensor::BasicTensor<T> trajectory_embed(const tensor::BasicTensor<T>& x, const tensor::BasicTensor<T>& weight,
                                        const tensor::BasicTensor<T>& bias);

/// e + table, broadcast over the batch.
template <typename T>
tensor::BasicTensor<T> positional_encode(const tensor::BasicTensor<T>& e, const tensor::BasicTensor<T>& table);

/// Self-attention over (B, N, d) with scaling 1 / sqrt(d / num_heads).
template <typename T>
tensor::BasicTensor<T> multi_head_attention(const tensor::BasicTensor<T>& x, const AttentionParams<T>& p,
                                            std::size_t num_heads, double dropout_rate, const ForwardOptions& opts);

/// x2 = MHA(LN1(x)) + x; out = MLP(LN2(x2)) + x2, both MLP layers GELU-activated.
template <typename T>
tensor::BasicTensor<T> transformer_block(const tensor::BasicTensor<T>& x, const BlockParams<T>& p,
                                         const ModelConfig& cfg, const ForwardOptions& opts);

/// Token representations after the final layer norm, (B, N, d).
template <typename T>
tensor::BasicTensor<T> encode(const ModelParams<T>& params, const ModelConfig& cfg, const tensor::BasicTensor<T>& x,
                              const ForwardOptions& opts = {});

/// (B, H, rows, cols, C) -> (B, 1, rows, cols, C). Throws NumericFailureError
/// naming the stage (-1 embedding, 0..L-1 blocks, L head) whose output is non-finite.
template <typename T>
tensor::BasicTensor<T> forward(const ModelParams<T>& params, const ModelConfig& cfg, const tensor::BasicTensor<T>& x,
                               const ForwardOptions& opts = {});

}  // namespace neuroflag::model
