#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "neuroflag/model/config.hpp"
#include "neuroflag/tensor/tensor.hpp"

namespace neuroflag::model {

/// Ordered, uniquely named parameter tensors. Order is the checkpoint order and
/// the order in which initialization draws from the RNG.
template <typename T>
class ModelParams {
 public:
  using TensorT = tensor::BasicTensor<T>;

  void add(std::string name, TensorT value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  /// Throws UsageError for an unknown name.
  const TensorT& get(const std::string& name) const;
  TensorT& get(const std::string& name);

  std::size_t size() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<TensorT>& tensors() const { return tensors_; }
  std::vector<TensorT>& tensors() { return tensors_; }
  /// Sum of element counts.
  std::size_t parameter_count() const;

  void zero_grad();
  void set_requires_grad(bool on);
  /// Deep copy with fresh leaf nodes.
  ModelParams clone() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    for (std::size_t i = 0; i < tensors_.size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<TensorT> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Every parameter name and shape the configuration requires, in canonical order.
std::vector<std::pair<std::string, tensor::Shape>> parameter_layout(const ModelConfig& cfg);

/// Truncated normal (sigma 0.02, cut at 2 sigma) for projection weights and the
/// positional table; zero biases; layer-norm gamma 1 and beta 0.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace neuroflag::model
