#include "neuroflag/tensor/tensor.hpp"

#include <sstream>

#include "neuroflag/error.hpp"

namespace neuroflag::tensor {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                         " values");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data.assign(data.begin(), data.end());
  node->requires_grad = requires_grad;
  node->is_leaf = true;
  return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return from_data(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::ptrdiff_t axis) const {
  const auto r = static_cast<std::ptrdiff_t>(rank());
  const auto a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool value) {
  if (!node_->is_leaf) throw UsageError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = value;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
  if (!node_->is_leaf) throw UsageError("mutable_data() is only available on leaf tensors");
  return node_->data;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return from_data(node_->shape, std::vector<T>(node_->data.begin(), node_->data.end()), false);
}

template <typename T>
GradTape<T>& GradTape<T>::current() {
  thread_local GradTape<T> tape;
  return tape;
}

template <typename T>
void GradTape<T>::record(const char* op, std::shared_ptr<Node<T>> output, BackwardFn backward) {
  entries_.push_back(Entry{op, std::move(output), std::move(backward)});
}

template <typename T>
void GradTape<T>::clear() {
  entries_.clear();
}

template <typename T>
std::vector<std::string> GradTape<T>::op_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.emplace_back(e.op);
  return names;
}

template <typename T>
void GradTape<T>::backward(const BasicTensor<T>& root) {
  if (!root.defined() || root.numel() != 1) {
    throw UsageError("backward() needs a scalar root, got shape " +
                     (root.defined() ? shape_str(root.shape()) : std::string("<undefined>")));
  }
  if (!root.requires_grad()) throw UsageError("backward() root does not require grad");

  auto& root_node = *root.node();
  root_node.ensure_grad()[0] += T(1);

  visit_order_.clear();
  for (std::size_t k = entries_.size(); k-- > 0;) {
    auto& entry = entries_[k];
    if (entry.output->grad.empty()) continue;
    entry.backward();
    visit_order_.push_back(k);
    // Interior gradients are consumed; release them to bound peak memory.
    if (!entry.output->is_leaf) {
      entry.output->grad.clear();
      entry.output->grad.shrink_to_fit();
    }
  }
  entries_.clear();
}

namespace detail {

template <typename T>
BasicTensor<T> make_result(Shape shape, Buffer<T> data, std::initializer_list<const BasicTensor<T>*> inputs) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool any = false;
  for (const auto* in : inputs) any = any || in->requires_grad();
  node->requires_grad = any && grad_enabled();
  node->is_leaf = !node->requires_grad;
  return BasicTensor<T>(std::move(node));
}

template <typename T>
BasicTensor<T> make_result(Shape shape, Buffer<T> data, const std::vector<BasicTensor<T>>& inputs) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  node->requires_grad = any && grad_enabled();
  node->is_leaf = !node->requires_grad;
  return BasicTensor<T>(std::move(node));
}

template BasicTensor<float> make_result(Shape, Buffer<float>, std::initializer_list<const BasicTensor<float>*>);
template BasicTensor<double> make_result(Shape, Buffer<double>,
                                         std::initializer_list<const BasicTensor<double>*>);
template BasicTensor<float> make_result(Shape, Buffer<float>, const std::vector<BasicTensor<float>>&);
template BasicTensor<double> make_result(Shape, Buffer<double>, const std::vector<BasicTensor<double>>&);

}  // namespace detail

template class BasicTensor<float>;
template class BasicTensor<double>;
template class GradTape<float>;
template class GradTape<double>;

}  // namespace neuroflag::tensor
