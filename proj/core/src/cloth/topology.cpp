#include "neuroflag/cloth/topology.hpp"

#include <algorithm>
#include <cmath>

namespace neuroflag::cloth {

SpringTopology SpringTopology::grid(std::size_t rows, std::size_t cols, double spacing) {
  SpringTopology topo;
  topo.rows = rows;
  topo.cols = cols;
  const auto idx = [cols](std::size_t i, std::size_t j) { return i * cols + j; };
  const double diag = spacing * std::sqrt(2.0);

  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j + 1 < cols) topo.springs.push_back({idx(i, j), idx(i, j + 1), SpringClass::structural, spacing});
      if (i + 1 < rows) topo.springs.push_back({idx(i, j), idx(i + 1, j), SpringClass::structural, spacing});
      if (i + 1 < rows && j + 1 < cols) {
        topo.springs.push_back({idx(i, j), idx(i + 1, j + 1), SpringClass::shear, diag});
      }
      if (i + 1 < rows && j >= 1) {
        topo.springs.push_back({idx(i, j), idx(i + 1, j - 1), SpringClass::shear, diag});
      }
      if (j + 2 < cols) topo.springs.push_back({idx(i, j), idx(i, j + 2), SpringClass::bend, 2.0 * spacing});
      if (i + 2 < rows) topo.springs.push_back({idx(i, j), idx(i + 2, j), SpringClass::bend, 2.0 * spacing});
    }
  }
  for (auto& s : topo.springs) {
    if (s.a > s.b) std::swap(s.a, s.b);
  }
  return topo;
}

std::size_t SpringTopology::count(SpringClass kind) const {
  return static_cast<std::size_t>(
      std::count_if(springs.begin(), springs.end(), [kind](const Spring& s) { return s.kind == kind; }));
}

}  // namespace neuroflag::cloth
