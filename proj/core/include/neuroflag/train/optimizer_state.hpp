#pragma once

#include <cstdint>
#include <vector>

namespace neuroflag::train {

/// Adam moments, one flat buffer per parameter in parameter order.
struct OptimizerState {
  std::uint64_t t = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  bool empty() const { return m.empty(); }
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

}  // namespace neuroflag::train
