#include "neuroflag/train/adam.hpp"

#include <cmath>

#include "neuroflag/error.hpp"

namespace neuroflag::train {

void AdamConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ParameterError("adam beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("adam beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ParameterError("adam epsilon must be positive");
}

OptimizerState make_optimizer_state(const model::ModelParams<float>& params) {
  OptimizerState s;
  for (const auto& t : params.tensors()) {
    s.m.emplace_back(t.numel(), 0.0f);
    s.v.emplace_back(t.numel(), 0.0f);
  }
  return s;
}

void adam_step(model::ModelParams<float>& params, OptimizerState& state, const AdamConfig& cfg) {
  if (state.empty()) state = make_optimizer_state(params);
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw UsageError("adam_step: optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params.tensors()[i];
    if (!p.has_grad()) throw UsageError("adam_step: parameter " + params.names()[i] + " has no gradient");
    if (state.m[i].size() != p.numel() || state.v[i].size() != p.numel()) {
      throw UsageError("adam_step: moment buffers for " + params.names()[i] + " have the wrong size");
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.tensors()[i];
    const auto g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto w = p.mutable_data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = cfg.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + cfg.epsilon);
      w[k] = static_cast<float>(static_cast<double>(w[k]) - update);
    }
  }
}

}  // namespace neuroflag::train
