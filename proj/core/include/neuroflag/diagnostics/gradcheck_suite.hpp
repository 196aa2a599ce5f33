#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neuroflag/model/config.hpp"
#include "neuroflag/tensor/gradcheck.hpp"

namespace neuroflag::diagnostics {

struct GradcheckCase {
  std::string name;
  /// "f64" or "f32".
  std::string precision;
  double tolerance = 0.0;
  tensor::GradcheckResult result;

  bool passed() const { return result.max_relative_error < tolerance; }
};

/// The configuration used for end-to-end checks: 2x2 grid, d = 8, 2 heads, 1 layer, history 4.
model::ModelConfig reduced_gradcheck_config();

/// Every differentiable op in 64-bit, each against `op_tolerance`.
std::vector<GradcheckCase> op_gradchecks(double op_tolerance = 1e-3, std::uint64_t seed = 11);

/// Full Huber loss of the reduced model with seeded dropout, in 64-bit
/// (against `tol64`) and 32-bit (against `tol32`).
std::vector<GradcheckCase> end_to_end_gradchecks(double tol64 = 1e-4, double tol32 = 1e-2, std::uint64_t seed = 11);

}  // namespace neuroflag::diagnostics
