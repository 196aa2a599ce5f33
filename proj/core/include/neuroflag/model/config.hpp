#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace neuroflag::model {

struct ModelConfig {
  std::size_t grid_rows = 11;
  std::size_t grid_cols = 11;
  std::size_t coords = 3;
  std::size_t history_len = 64;
  std::size_t projection_dim = 128;
  std::size_t num_heads = 8;
  std::size_t num_layers = 8;
  std::size_t mlp_expansion = 4;
  double dropout_rate = 0.1;
  double layer_norm_eps = 1e-6;

  std::size_t num_patches() const { return grid_rows * grid_cols; }
  std::size_t key_dim() const { return projection_dim / num_heads; }
  std::size_t mlp_dim() const { return projection_dim * mlp_expansion; }
  /// Length of one flattened trajectory token.
  std::size_t token_dim() const { return history_len * coords; }
  std::size_t output_dim() const { return num_patches() * coords; }

  /// Throws ParameterError naming the first violated constraint.
  void validate() const;
  /// Number of trainable scalars implied by the configuration.
  std::size_t parameter_count() const;
  /// Stable hash over every field.
  std::uint64_t fingerprint() const;
  std::string describe() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace neuroflag::model
