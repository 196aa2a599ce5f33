#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace neuroflag::tensor {

using Shape = std::vector<std::size_t>;

/// Allocates on 64-byte boundaries so vectorized kernels split every buffer of a
/// given length identically, keeping results independent of heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Storage behind a tensor handle. Several handles may share one node.
template <typename T>
struct Node {
  Shape shape;
  Buffer<T> data;
  /// Empty until a gradient is first accumulated.
  Buffer<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;

  /// Zero-filled gradient buffer, allocated on first use.
  std::span<T> ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Is gradient recording enabled on this thread?
bool grad_enabled() noexcept;

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Handle to a dense row-major array that can take part in reverse-mode differentiation.
///
/// Copying a handle aliases the same node. Values are fixed at creation; the only
/// mutation path is `mutable_data()` on leaves, used by optimizers, initializers
/// and gradcheck perturbation.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  /// Size of `axis`; negative values count from the back.
  std::size_t dim(std::ptrdiff_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  T operator[](std::size_t flat_index) const { return node_->data[flat_index]; }
  /// Value of a single-element tensor.
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value);
  bool is_leaf() const { return node_->is_leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Writable view of a leaf's values. Throws UsageError on non-leaf tensors.
  std::span<T> mutable_data();

  /// New leaf with copied values and no gradient history.
  BasicTensor detach() const;

  /// New leaf holding the values converted to U, keeping requires_grad.
  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> converted(node_->data.begin(), node_->data.end());
    return BasicTensor<U>::from_data(node_->shape, std::move(converted), node_->requires_grad);
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Ordered record of the differentiable ops executed on one thread.
///
/// Each op that produces a requires_grad output appends an entry holding the
/// output node and a closure that pushes the output gradient into the inputs.
/// `backward` replays entries in exact reverse order, runs each closure at most
/// once, drops non-leaf gradients as soon as they have been consumed, and then
/// clears the tape.
template <typename T>
class GradTape {
 public:
  using BackwardFn = std::function<void()>;

  /// The tape owned by the calling thread.
  static GradTape& current();

  void record(const char* op, std::shared_ptr<Node<T>> output, BackwardFn backward);
  void backward(const BasicTensor<T>& root);
  void clear();
  std::size_t size() const noexcept { return entries_.size(); }

  /// Op names in recording order.
  std::vector<std::string> op_names() const;
  /// Recording indices of the entries whose closures ran in the last backward, in visit order.
  const std::vector<std::size_t>& last_visit_order() const noexcept { return visit_order_; }

 private:
  struct Entry {
    const char* op;
    std::shared_ptr<Node<T>> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::vector<std::size_t> visit_order_;
};

/// Populates gradients of every requires_grad leaf reachable from a scalar root.
template <typename T>
void backward(const BasicTensor<T>& root) {
  GradTape<T>::current().backward(root);
}

namespace detail {

/// Builds an op result. The result requires grad when recording is enabled
/// and any input does; callers then register a closure with `record_op`.
template <typename T>
BasicTensor<T> make_result(Shape shape, Buffer<T> data, std::initializer_list<const BasicTensor<T>*> inputs);

template <typename T>
BasicTensor<T> make_result(Shape shape, Buffer<T> data, const std::vector<BasicTensor<T>>& inputs);

template <typename T>
void record_op(const char* op, const BasicTensor<T>& output, typename GradTape<T>::BackwardFn fn) {
  GradTape<T>::current().record(op, output.node(), std::move(fn));
}

}  // namespace detail

}  // namespace neuroflag::tensor
