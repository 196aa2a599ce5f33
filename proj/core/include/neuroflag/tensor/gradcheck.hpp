#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "neuroflag/tensor/tensor.hpp"

namespace neuroflag::tensor {

struct GradcheckOptions {
  /// Central-difference half step h.
  double step = 1e-3;
  /// Denominator floor: relative error is |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-6;
  /// Check at most this many elements per parameter (evenly strided); 0 checks all.
  std::size_t max_elements_per_param = 0;
};

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// Compares tape gradients of a scalar function against central finite differences.
///
/// `f` must rebuild its graph from `params` on every call. The finite
/// differences (f(p+h) - f(p-h)) / (p+h - (p-h)) are formed in double, using
/// the actually representable perturbation. Throws NondeterminismError if two
/// evaluations at the unperturbed point disagree (e.g. unseeded dropout), and
/// ParameterError if step <= 0.
template <typename T>
GradcheckResult gradcheck(const std::function<BasicTensor<T>()>& f, std::vector<BasicTensor<T>> params,
                          const GradcheckOptions& options = {});

}  // namespace neuroflag::tensor
