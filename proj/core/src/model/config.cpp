#include "neuroflag/model/config.hpp"

#include <fmt/format.h>

#include "neuroflag/error.hpp"
#include "neuroflag/fingerprint.hpp"

namespace neuroflag::model {

void ModelConfig::validate() const {
  if (grid_rows == 0 || grid_cols == 0) throw ParameterError("model grid must be non-empty");
  if (coords == 0) throw ParameterError("model coords must be positive");
  if (history_len == 0) throw ParameterError("history_len must be positive");
  if (projection_dim == 0 || num_heads == 0) throw ParameterError("projection_dim and num_heads must be positive");
  if (projection_dim % num_heads != 0) {
    throw ParameterError(fmt::format("projection_dim {} is not divisible by num_heads {}", projection_dim, num_heads));
  }
  if (mlp_expansion == 0) throw ParameterError("mlp_expansion must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ParameterError("dropout_rate must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) throw ParameterError("layer_norm_eps must be positive");
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t d = projection_dim;
  const std::size_t ln = 2 * d;
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t mlp = (d * mlp_dim() + mlp_dim()) + (mlp_dim() * d + d);
  const std::size_t block = 2 * ln + attention + mlp;
  return (token_dim() * d + d) + num_patches() * d + num_layers * block + ln + (d * output_dim() + output_dim());
}

std::uint64_t ModelConfig::fingerprint() const {
  return fnv1a64(describe());
}

std::string ModelConfig::describe() const {
  return fmt::format(
      "grid={}x{} coords={} history={} d={} heads={} layers={} mlp={} dropout={:a} eps={:a}", grid_rows, grid_cols,
      coords, history_len, projection_dim, num_heads, num_layers, mlp_expansion, dropout_rate, layer_norm_eps);
}

}  // namespace neuroflag::model
