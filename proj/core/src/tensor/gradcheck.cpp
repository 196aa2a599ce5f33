#include "neuroflag/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "neuroflag/error.hpp"

namespace neuroflag::tensor {

template <typename T>
GradcheckResult gradcheck(const std::function<BasicTensor<T>()>& f, std::vector<BasicTensor<T>> params,
                          const GradcheckOptions& options) {
  if (!(options.step > 0.0)) throw ParameterError("gradcheck: step must be positive");

  const auto evaluate = [&]() {
    NoGradGuard guard;
    const auto out = f();
    return static_cast<double>(out.item());
  };

  const double f0 = evaluate();
  const double f1 = evaluate();
  if (std::memcmp(&f0, &f1, sizeof(double)) != 0) {
    throw NondeterminismError("gradcheck: function returned different values on repeated evaluation");
  }

  GradTape<T>::current().clear();
  for (auto& p : params) {
    p.zero_grad();
    if (!p.requires_grad()) p.set_requires_grad(true);
  }
  {
    const auto root = f();
    backward(root);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.numel(), 0.0);
    }
  }

  GradcheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_data();
    const std::size_t n = values.size();
    std::size_t stride = 1;
    if (options.max_elements_per_param > 0 && n > options.max_elements_per_param) {
      stride = (n + options.max_elements_per_param - 1) / options.max_elements_per_param;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const T original = values[i];
      const T up = static_cast<T>(static_cast<double>(original) + options.step);
      const T down = static_cast<T>(static_cast<double>(original) - options.step);
      values[i] = up;
      const double f_up = evaluate();
      values[i] = down;
      const double f_down = evaluate();
      values[i] = original;

      const double numeric = (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.elements_checked;
      if (rel > result.max_relative_error || result.elements_checked == 1) {
        result.max_relative_error = rel;
        result.worst_param = pi;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

template GradcheckResult gradcheck(const std::function<BasicTensor<float>()>&, std::vector<BasicTensor<float>>,
                                   const GradcheckOptions&);
template GradcheckResult gradcheck(const std::function<BasicTensor<double>()>&, std::vector<BasicTensor<double>>,
                                   const GradcheckOptions&);

}  // namespace neuroflag::tensor
