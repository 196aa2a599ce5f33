#pragma once

#include "neuroflag/tensor/tensor.hpp"

namespace neuroflag::train {

inline constexpr double kDefaultHuberDelta = 1.0;

/// Mean over all elements of 0.5 r^2 for |r| <= delta and delta (|r| - 0.5 delta)
/// otherwise, with r = pred - target. Differentiable in both arguments.
template <typename T>
tensor::BasicTensor<T> huber_loss(const tensor::BasicTensor<T>& pred, const tensor::BasicTensor<T>& target,
                                  double delta = kDefaultHuberDelta);

/// Elementwise value, for reference and tests.
double huber_value(double residual, double delta);

}  // namespace neuroflag::train
