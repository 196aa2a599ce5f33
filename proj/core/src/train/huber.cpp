#include "neuroflag/train/huber.hpp"

#include <algorithm>
#include <cmath>

#include "neuroflag/error.hpp"

namespace neuroflag::train {

using tensor::BasicTensor;

double huber_value(double residual, double delta) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

template <typename T>
BasicTensor<T> huber_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double delta) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("huber_loss: prediction " + tensor::shape_str(pred.shape()) + " vs target " +
                         tensor::shape_str(target.shape()));
  }
  if (!(delta > 0.0)) throw ParameterError("huber_loss: delta must be positive");
  const auto p = pred.data();
  const auto t = target.data();
  const std::size_t n = p.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += huber_value(static_cast<double>(p[i]) - static_cast<double>(t[i]), delta);
  const double loss = n == 0 ? 0.0 : acc / static_cast<double>(n);

  auto result = tensor::detail::make_result<T>({1}, {static_cast<T>(loss)}, {&pred, &target});
  if (result.requires_grad()) {
    tensor::detail::record_op<T>("huber_loss", result,
                                 [pn = pred.node(), tn = target.node(), on = result.node().get(), delta, n]() {
                                   const double g = static_cast<double>(on->grad[0]) / static_cast<double>(n);
                                   const auto slope = [&](std::size_t i) {
                                     const double r = static_cast<double>(pn->data[i]) - static_cast<double>(tn->data[i]);
                                     return static_cast<T>(g * std::clamp(r, -delta, delta));
                                   };
                                   if (pn->requires_grad) {
                                     auto gp = pn->ensure_grad();
                                     for (std::size_t i = 0; i < n; ++i) gp[i] += slope(i);
                                   }
                                   if (tn->requires_grad) {
                                     auto gt = tn->ensure_grad();
                                     for (std::size_t i = 0; i < n; ++i) gt[i] -= slope(i);
                                   }
                                 });
  }
  return result;
}

template BasicTensor<float> huber_loss(const BasicTensor<float>&, const BasicTensor<float>&, double);
template BasicTensor<double> huber_loss(const BasicTensor<double>&, const BasicTensor<double>&, double);

}  // namespace neuroflag::train
