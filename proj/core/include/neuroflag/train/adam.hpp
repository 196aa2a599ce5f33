#pragma once

#include "neuroflag/model/params.hpp"
#include "neuroflag/train/optimizer_state.hpp"

namespace neuroflag::train {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Zero moments shaped like `params`.
OptimizerState make_optimizer_state(const model::ModelParams<float>& params);

/// One bias-corrected Adam update, in double per element:
///   t += 1
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   p -= lr (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Every parameter must hold a gradient; the first one without raises UsageError
/// naming it (before anything is modified).
void adam_step(model::ModelParams<float>& params, OptimizerState& state, const AdamConfig& cfg);

}  // namespace neuroflag::train
