#include "neuroflag/model/params.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "neuroflag/error.hpp"
#include "neuroflag/rng.hpp"

namespace neuroflag::model {

namespace {

constexpr double kInitStddev = 0.02;

enum class InitKind { truncated_normal, zeros, ones };

InitKind init_kind(const std::string& name) {
  const auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".gamma")) return InitKind::ones;
  if (ends_with(".beta") || ends_with(".bias")) return InitKind::zeros;
  return InitKind::truncated_normal;
}

}  // namespace

template <typename T>
void ModelParams<T>::add(std::string name, TensorT value) {
  if (index_.count(name) != 0) throw UsageError("duplicate parameter name " + name);
  index_.emplace(name, tensors_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

template <typename T>
const typename ModelParams<T>::TensorT& ModelParams<T>::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return tensors_[it->second];
}

template <typename T>
typename ModelParams<T>::TensorT& ModelParams<T>::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return tensors_[it->second];
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool on) {
  for (auto& t : tensors_) t.set_requires_grad(on);
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams out;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto copy = tensors_[i].detach();
    copy.set_requires_grad(tensors_[i].requires_grad());
    out.add(names_[i], std::move(copy));
  }
  return out;
}

std::vector<std::pair<std::string, tensor::Shape>> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.projection_dim;
  std::vector<std::pair<std::string, tensor::Shape>> layout;
  layout.emplace_back("embed.weight", tensor::Shape{cfg.token_dim(), d});
  layout.emplace_back("embed.bias", tensor::Shape{d});
  layout.emplace_back("pos_table", tensor::Shape{cfg.num_patches(), d});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const auto p = fmt::format("blocks.{}.", l);
    layout.emplace_back(p + "ln1.gamma", tensor::Shape{d});
    layout.emplace_back(p + "ln1.beta", tensor::Shape{d});
    for (const char* proj : {"q", "k", "v", "o"}) {
      layout.emplace_back(p + "attn." + proj + ".weight", tensor::Shape{d, d});
      layout.emplace_back(p + "attn." + proj + ".bias", tensor::Shape{d});
    }
    layout.emplace_back(p + "ln2.gamma", tensor::Shape{d});
    layout.emplace_back(p + "ln2.beta", tensor::Shape{d});
    layout.emplace_back(p + "mlp.fc1.weight", tensor::Shape{d, cfg.mlp_dim()});
    layout.emplace_back(p + "mlp.fc1.bias", tensor::Shape{cfg.mlp_dim()});
    layout.emplace_back(p + "mlp.fc2.weight", tensor::Shape{cfg.mlp_dim(), d});
    layout.emplace_back(p + "mlp.fc2.bias", tensor::Shape{d});
  }
  layout.emplace_back("final_ln.gamma", tensor::Shape{d});
  layout.emplace_back("final_ln.beta", tensor::Shape{d});
  layout.emplace_back("head.weight", tensor::Shape{d, cfg.output_dim()});
  layout.emplace_back("head.bias", tensor::Shape{cfg.output_dim()});
  return layout;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams<T> params;
  for (auto& [name, shape] : parameter_layout(cfg)) {
    std::vector<T> values(tensor::shape_numel(shape));
    switch (init_kind(name)) {
      case InitKind::ones:
        std::fill(values.begin(), values.end(), T(1));
        break;
      case InitKind::zeros:
        break;
      case InitKind::truncated_normal:
        for (auto& v : values) v = static_cast<T>(rng.truncated_normal(kInitStddev));
        break;
    }
    params.add(name, tensor::BasicTensor<T>::from_data(shape, std::move(values), true));
  }
  return params;
}

template class ModelParams<float>;
template class ModelParams<double>;
template ModelParams<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelConfig&, std::uint64_t);

}  // namespace neuroflag::model
