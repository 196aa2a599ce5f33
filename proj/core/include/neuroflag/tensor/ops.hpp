#pragma once

#include <cstddef>
#include <vector>

#include "neuroflag/rng.hpp"
#include "neuroflag/tensor/tensor.hpp"

// Differentiable tensor operations. Every op records a backward closure on the
// calling thread's tape when gradient recording is on and an input requires grad.
//
// Broadcasting is deliberately narrow: elementwise binary ops need identical
// shapes (or a single-element right operand for add/sub/mul), and `add_bias`
// covers the trailing-shape case (bias vectors, positional tables).
namespace neuroflag::tensor {

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

/// x + b where b's shape equals the trailing dimensions of x.
template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& b);

/// Sum / mean of all elements, as a shape-(1,) tensor.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

/// Batched matrix product over the last two axes; leading axes must match exactly.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Swap of the last two axes.
template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x);

/// General axis permutation: output axis k is input axis `axes[k]`.
template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, const std::vector<std::size_t>& axes);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& xs, std::ptrdiff_t axis);

template <typename T>
std::vector<BasicTensor<T>> split(const BasicTensor<T>& x, std::ptrdiff_t axis, const std::vector<std::size_t>& sizes);

/// Max-subtracted softmax along `axis`.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::ptrdiff_t axis);

/// Normalizes each last-axis slice to zero mean and unit (biased) variance, then applies gamma/beta.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta, T eps);

/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x);

/// x[..., d_in] * w[d_in, d_out] + bias[d_out].
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias);

/// Mean over the token axis of x[..., tokens, d].
template <typename T>
BasicTensor<T> mean_pool(const BasicTensor<T>& x);

/// Inverted dropout. Identity (the same handle) when `training` is false or rate is 0.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng);

}  // namespace neuroflag::tensor
