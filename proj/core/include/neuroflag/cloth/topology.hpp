#pragma once

#include <cstddef>
#include <vector>

namespace neuroflag::cloth {

enum class SpringClass { structural, shear, bend };

struct Spring {
  std::size_t a;
  std::size_t b;
  SpringClass kind;
  double rest_length;
};

/// Spring wiring of a rows x cols particle grid; particle index = row * cols + col.
///
/// Structural springs join 4-neighbours (rest = spacing), shear springs join
/// diagonal neighbours (spacing * sqrt 2) and bend springs join particles two
/// apart along a row or column (2 * spacing). Every pair appears once with a < b.
struct SpringTopology {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Spring> springs;

  static SpringTopology grid(std::size_t rows, std::size_t cols, double spacing);

  std::size_t count(SpringClass kind) const;
};

}  // namespace neuroflag::cloth
