#include "neuroflag/tensor/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "neuroflag/error.hpp"

namespace neuroflag::tensor {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMat = Eigen::Map<RowMat<T>>;

/// c[m, n] (+)= op(a) * op(b), with op(a) of shape m x k and op(b) of shape k x n.
template <typename T>
void gemm(const T* a, bool trans_a, const T* b, bool trans_b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto K = static_cast<Eigen::Index>(k);
  const auto N = static_cast<Eigen::Index>(n);
  ConstMat<T> A(a, trans_a ? K : M, trans_a ? M : K);
  ConstMat<T> B(b, trans_b ? N : K, trans_b ? K : N);
  MutMat<T> C(c, M, N);
  if (!accumulate) C.setZero();
  if (!trans_a && !trans_b) {
    C.noalias() += A * B;
  } else if (!trans_a && trans_b) {
    C.noalias() += A * B.transpose();
  } else if (trans_a && !trans_b) {
    C.noalias() += A.transpose() * B;
  } else {
    C.noalias() += A.transpose() * B.transpose();
  }
}

std::size_t normalize_axis(std::ptrdiff_t axis, std::size_t rank, const Shape& shape) {
  const auto r = static_cast<std::ptrdiff_t>(rank);
  const auto a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
  }
  return static_cast<std::size_t>(a);
}

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t n = 1;
  for (std::size_t i = begin; i < end; ++i) n *= s[i];
  return n;
}

template <typename T>
bool is_scalar(const BasicTensor<T>& t) {
  return t.numel() == 1;
}

template <typename T>
void check_binary(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape() && !is_scalar(b)) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " are not compatible");
  }
}

// Drives `fn(out_offset, in_offset)` over every element of a permuted view.
template <typename Fn>
void for_each_permuted(const Shape& out_shape, const std::vector<std::size_t>& src_stride, Fn&& fn) {
  const std::size_t rank = out_shape.size();
  const std::size_t total = shape_numel(out_shape);
  const std::size_t inner = out_shape[rank - 1];
  const std::size_t inner_stride = src_stride[rank - 1];
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t out = 0; out < total; out += inner) {
    for (std::size_t j = 0; j < inner; ++j) fn(out + j, src + j * inner_stride);
    // Advance the odometer over all but the innermost axis.
    for (std::size_t ax = rank - 1; ax-- > 0;) {
      ++counter[ax];
      src += src_stride[ax];
      if (counter[ax] < out_shape[ax]) break;
      src -= src_stride[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_binary("add", a, b);
  const bool bs = a.shape() != b.shape();
  Buffer<T> out(a.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  if (bs) {
    const T s = bd[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + s;
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  }
  auto result = detail::make_result(a.shape(), std::move(out), {&a, &b});
  if (result.requires_grad()) {
    detail::record_op<T>("add", result, [an = a.node(), bn = b.node(), on = result.node().get(), bs]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->ensure_grad();
        if (bs) {
          T acc = 0;
          for (auto v : g) acc += v;
          gb[0] += acc;
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_binary("sub", a, b);
  const bool bs = a.shape() != b.shape();
  Buffer<T> out(a.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[bs ? 0 : i];
  auto result = detail::make_result(a.shape(), std::move(out), {&a, &b});
  if (result.requires_grad()) {
    detail::record_op<T>("sub", result, [an = a.node(), bn = b.node(), on = result.node().get(), bs]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[bs ? 0 : i] -= g[i];
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_binary("mul", a, b);
  const bool bs = a.shape() != b.shape();
  Buffer<T> out(a.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[bs ? 0 : i];
  auto result = detail::make_result(a.shape(), std::move(out), {&a, &b});
  if (result.requires_grad()) {
    detail::record_op<T>("mul", result, [an = a.node(), bn = b.node(), on = result.node().get(), bs]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[bs ? 0 : i];
      }
      if (bn->requires_grad) {
        auto gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[bs ? 0 : i] += g[i] * an->data[i];
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  Buffer<T> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factor;
  auto result = detail::make_result(x.shape(), std::move(out), {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("scale", result, [xn = x.node(), on = result.node().get(), factor]() {
      auto gx = xn->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i] * factor;
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& b) {
  const auto& xs = x.shape();
  const auto& bsh = b.shape();
  if (bsh.size() > xs.size() || !std::equal(bsh.begin(), bsh.end(), xs.end() - static_cast<std::ptrdiff_t>(bsh.size()))) {
    throw DimensionError("add_bias: bias shape " + shape_str(bsh) + " is not a suffix of " + shape_str(xs));
  }
  const std::size_t inner = b.numel();
  const std::size_t outer = x.numel() / inner;
  Buffer<T> out(x.numel());
  const auto xd = x.data();
  const auto bd = b.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) out[o * inner + j] = xd[o * inner + j] + bd[j];
  }
  auto result = detail::make_result(xs, std::move(out), {&x, &b});
  if (result.requires_grad()) {
    detail::record_op<T>("add_bias", result, [xn = x.node(), bn = b.node(), on = result.node().get(), inner, outer]() {
      const auto& g = on->grad;
      if (xn->requires_grad) {
        auto gx = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bn->requires_grad) {
        auto gb = bn->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t j = 0; j < inner; ++j) gb[j] += g[o * inner + j];
        }
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T acc = 0;
  for (auto v : x.data()) acc += v;
  auto result = detail::make_result(Shape{1}, Buffer<T>{acc}, {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("sum", result, [xn = x.node(), on = result.node().get()]() {
      auto gx = xn->ensure_grad();
      const T g = on->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  T acc = 0;
  for (auto v : x.data()) acc += v;
  const T inv_n = T(1) / static_cast<T>(x.numel());
  auto result = detail::make_result(Shape{1}, Buffer<T>{acc * inv_n}, {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("mean", result, [xn = x.node(), on = result.node().get(), inv_n]() {
      auto gx = xn->ensure_grad();
      const T g = on->grad[0] * inv_n;
      for (auto& v : gx) v += g;
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  const auto fail = [&]() {
    throw DimensionError("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
  };
  if (as.size() < 2 || as.size() != bs.size()) fail();
  const std::size_t r = as.size();
  if (!std::equal(as.begin(), as.end() - 2, bs.begin())) fail();
  const std::size_t m = as[r - 2], k = as[r - 1], n = bs[r - 1];
  if (bs[r - 2] != k) fail();
  const std::size_t batch = prod(as, 0, r - 2);

  Shape out_shape(as.begin(), as.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  Buffer<T> out(batch * m * n);
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(ad + i * m * k, false, bd + i * k * n, false, out.data() + i * m * n, m, k, n, false);
  }
  auto result = detail::make_result(std::move(out_shape), std::move(out), {&a, &b});
  if (result.requires_grad()) {
    detail::record_op<T>("matmul", result, [an = a.node(), bn = b.node(), on = result.node().get(), batch, m, k, n]() {
      const T* g = on->grad.data();
      if (an->requires_grad) {
        T* ga = an->ensure_grad().data();
        for (std::size_t i = 0; i < batch; ++i) {
          gemm(g + i * m * n, false, bn->data.data() + i * k * n, true, ga + i * m * k, m, n, k, true);
        }
      }
      if (bn->requires_grad) {
        T* gb = bn->ensure_grad().data();
        for (std::size_t i = 0; i < batch; ++i) {
          gemm(an->data.data() + i * m * k, true, g + i * m * n, false, gb + i * k * n, k, m, n, true);
        }
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, const std::vector<std::size_t>& axes) {
  const auto& xs = x.shape();
  const std::size_t rank = xs.size();
  if (axes.size() != rank) {
    throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for shape " + shape_str(xs));
  }
  std::vector<bool> seen(rank, false);
  for (auto a : axes) {
    if (a >= rank || seen[a]) throw DimensionError("permute: invalid axis order for shape " + shape_str(xs));
    seen[a] = true;
  }
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t ax = rank - 1; ax-- > 0;) in_stride[ax] = in_stride[ax + 1] * xs[ax + 1];
  Shape out_shape(rank);
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    out_shape[k] = xs[axes[k]];
    src_stride[k] = in_stride[axes[k]];
  }
  Buffer<T> out(x.numel());
  const auto xd = x.data();
  for_each_permuted(out_shape, src_stride, [&](std::size_t o, std::size_t s) { out[o] = xd[s]; });
  auto result = detail::make_result(out_shape, std::move(out), {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("permute", result, [xn = x.node(), on = result.node().get(), out_shape, src_stride]() {
      auto gx = xn->ensure_grad();
      const auto& g = on->grad;
      for_each_permuted(out_shape, src_stride, [&](std::size_t o, std::size_t s) { gx[s] += g[o]; });
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x) {
  const std::size_t rank = x.rank();
  if (rank < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_str(x.shape()));
  std::vector<std::size_t> axes(rank);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[rank - 1], axes[rank - 2]);
  return permute(x, axes);
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw DimensionError("reshape: zero dimension in " + shape_str(shape));
  }
  Buffer<T> out(x.data().begin(), x.data().end());
  auto result = detail::make_result(std::move(shape), std::move(out), {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("reshape", result, [xn = x.node(), on = result.node().get()]() {
      auto gx = xn->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i];
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& xs, std::ptrdiff_t axis) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  const auto& s0 = xs[0].shape();
  const std::size_t ax = normalize_axis(axis, s0.size(), s0);
  Shape out_shape = s0;
  out_shape[ax] = 0;
  for (const auto& t : xs) {
    const auto& s = t.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == ax || s[d] == s0[d];
    if (!ok) throw DimensionError("concat: shape " + shape_str(s) + " incompatible with " + shape_str(s0));
    out_shape[ax] += s[ax];
  }
  const std::size_t outer = prod(s0, 0, ax);
  const std::size_t inner = prod(s0, ax + 1, s0.size());
  const std::size_t out_chunk = out_shape[ax] * inner;
  std::vector<std::size_t> offsets;
  Buffer<T> out(shape_numel(out_shape));
  std::size_t off = 0;
  for (const auto& t : xs) {
    const std::size_t chunk = t.shape()[ax] * inner;
    const auto d = t.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_chunk + off));
    }
    offsets.push_back(off);
    off += chunk;
  }
  auto result = detail::make_result(out_shape, std::move(out), xs);
  if (result.requires_grad()) {
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (const auto& t : xs) nodes.push_back(t.node());
    detail::record_op<T>("concat", result, [nodes, offsets, on = result.node().get(), outer, out_chunk]() {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i]->requires_grad) continue;
        auto gx = nodes[i]->ensure_grad();
        const std::size_t chunk = gx.size() / outer;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t j = 0; j < chunk; ++j) gx[o * chunk + j] += on->grad[o * out_chunk + offsets[i] + j];
        }
      }
    });
  }
  return result;
}

template <typename T>
std::vector<BasicTensor<T>> split(const BasicTensor<T>& x, std::ptrdiff_t axis, const std::vector<std::size_t>& sizes) {
  const auto& xs = x.shape();
  const std::size_t ax = normalize_axis(axis, xs.size(), xs);
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total != xs[ax]) {
    throw DimensionError("split: sizes sum to " + std::to_string(total) + " but axis has " + std::to_string(xs[ax]));
  }
  const std::size_t outer = prod(xs, 0, ax);
  const std::size_t inner = prod(xs, ax + 1, xs.size());
  const std::size_t in_chunk = xs[ax] * inner;
  std::vector<BasicTensor<T>> parts;
  std::size_t off = 0;
  const auto xd = x.data();
  for (auto sz : sizes) {
    Shape ps = xs;
    ps[ax] = sz;
    const std::size_t chunk = sz * inner;
    Buffer<T> out(outer * chunk);
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(o * in_chunk + off), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * chunk));
    }
    auto part = detail::make_result(std::move(ps), std::move(out), {&x});
    if (part.requires_grad()) {
      detail::record_op<T>("split", part, [xn = x.node(), on = part.node().get(), outer, chunk, in_chunk, off]() {
        auto gx = xn->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t j = 0; j < chunk; ++j) gx[o * in_chunk + off + j] += on->grad[o * chunk + j];
        }
      });
    }
    parts.push_back(std::move(part));
    off += chunk;
  }
  return parts;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::ptrdiff_t axis) {
  const auto& xs = x.shape();
  const std::size_t ax = normalize_axis(axis, xs.size(), xs);
  const std::size_t outer = prod(xs, 0, ax);
  const std::size_t len = xs[ax];
  const std::size_t inner = prod(xs, ax + 1, xs.size());
  Buffer<T> out(x.numel());
  const auto xd = x.data();
  if (inner == 1) {
    // Contiguous rows: vectorized exp.
    const auto L = static_cast<Eigen::Index>(len);
    for (std::size_t o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> in(xd.data() + o * len, L);
      Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> row(out.data() + o * len, L);
      row = (in - in.maxCoeff()).exp();
      row *= T(1) / row.sum();
    }
  } else {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        T mx = xd[base];
        for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xd[base + j * inner]);
        T total = 0;
        for (std::size_t j = 0; j < len; ++j) {
          const T e = std::exp(xd[base + j * inner] - mx);
          out[base + j * inner] = e;
          total += e;
        }
        const T inv = T(1) / total;
        for (std::size_t j = 0; j < len; ++j) out[base + j * inner] *= inv;
      }
    }
  }
  auto result = detail::make_result(xs, std::move(out), {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("softmax", result, [xn = x.node(), on = result.node().get(), outer, len, inner]() {
      auto gx = xn->ensure_grad();
      const auto& y = on->data;
      const auto& g = on->grad;
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t base = o * len * inner + i;
          T dot = 0;
          for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * y[base + j * inner];
          for (std::size_t j = 0; j < len; ++j) {
            const std::size_t idx = base + j * inner;
            gx[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta, T eps) {
  if (!(eps > T(0))) throw ParameterError("layer_norm: eps must be positive");
  const std::size_t n = x.dim(-1);
  if (gamma.numel() != n || beta.numel() != n) {
    throw DimensionError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()) +
                         " do not match last axis of " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  Buffer<T> out(x.numel());
  Buffer<T> xhat(x.numel());
  Buffer<T> rstd(rows);
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xd.data() + r * n;
    double mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const T rs = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    rstd[r] = rs;
    for (std::size_t j = 0; j < n; ++j) {
      const T h = static_cast<T>(row[j] - mu) * rs;
      xhat[r * n + j] = h;
      out[r * n + j] = h * gd[j] + bd[j];
    }
  }
  auto result = detail::make_result(x.shape(), std::move(out), {&x, &gamma, &beta});
  if (result.requires_grad()) {
    detail::record_op<T>("layer_norm", result,
                         [xn = x.node(), gn = gamma.node(), bn = beta.node(), on = result.node().get(),
                          xhat = std::move(xhat), rstd = std::move(rstd), rows, n]() {
                           const auto& g = on->grad;
                           if (gn->requires_grad || bn->requires_grad) {
                             auto gg = gn->requires_grad ? gn->ensure_grad() : std::span<T>{};
                             auto gb = bn->requires_grad ? bn->ensure_grad() : std::span<T>{};
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t j = 0; j < n; ++j) {
                                 if (!gg.empty()) gg[j] += g[r * n + j] * xhat[r * n + j];
                                 if (!gb.empty()) gb[j] += g[r * n + j];
                               }
                             }
                           }
                           if (xn->requires_grad) {
                             auto gx = xn->ensure_grad();
                             const auto& gd2 = gn->data;
                             const T inv_n = T(1) / static_cast<T>(n);
                             for (std::size_t r = 0; r < rows; ++r) {
                               T sum_d = 0, sum_dh = 0;
                               for (std::size_t j = 0; j < n; ++j) {
                                 const T d = g[r * n + j] * gd2[j];
                                 sum_d += d;
                                 sum_dh += d * xhat[r * n + j];
                               }
                               for (std::size_t j = 0; j < n; ++j) {
                                 const T d = g[r * n + j] * gd2[j];
                                 gx[r * n + j] +=
                                     rstd[r] * inv_n * (static_cast<T>(n) * d - sum_d - xhat[r * n + j] * sum_dh);
                               }
                             }
                           }
                         });
  }
  return result;
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(x.numel());
  Eigen::Map<const Arr> v(x.data().data(), n);
  const T c = static_cast<T>(kGeluC);
  const T a = static_cast<T>(kGeluA);
  Arr t = (c * (v + a * v.cube())).tanh();
  Buffer<T> out(x.numel());
  Eigen::Map<Arr>(out.data(), n) = T(0.5) * v * (T(1) + t);
  auto result = detail::make_result(x.shape(), std::move(out), {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("gelu", result, [xn = x.node(), on = result.node().get(), c, a, t = std::move(t)]() {
      const auto m = static_cast<Eigen::Index>(xn->data.size());
      Eigen::Map<const Arr> xv(xn->data.data(), m);
      Eigen::Map<const Arr> g(on->grad.data(), m);
      Eigen::Map<Arr> gx(xn->ensure_grad().data(), m);
      const auto dt = (T(1) - t.square()) * c * (T(1) + T(3) * a * xv.square());
      gx += g * (T(0.5) * (T(1) + t) + T(0.5) * xv * dt);
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias) {
  if (w.rank() != 2 || x.dim(-1) != w.shape()[0] || bias.numel() != w.shape()[1]) {
    throw DimensionError("dense: input " + shape_str(x.shape()) + ", weight " + shape_str(w.shape()) + ", bias " +
                         shape_str(bias.shape()) + " do not agree");
  }
  const std::size_t d_in = w.shape()[0];
  const std::size_t d_out = w.shape()[1];
  const std::size_t rows = x.numel() / d_in;
  Shape out_shape = x.shape();
  out_shape.back() = d_out;
  Buffer<T> out(rows * d_out);
  const auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bd.begin(), bd.end(), out.begin() + static_cast<std::ptrdiff_t>(r * d_out));
  gemm(x.data().data(), false, w.data().data(), false, out.data(), rows, d_in, d_out, true);
  auto result = detail::make_result(std::move(out_shape), std::move(out), {&x, &w, &bias});
  if (result.requires_grad()) {
    detail::record_op<T>("dense", result,
                         [xn = x.node(), wn = w.node(), bn = bias.node(), on = result.node().get(), rows, d_in, d_out]() {
                           const T* g = on->grad.data();
                           if (xn->requires_grad) {
                             gemm(g, false, wn->data.data(), true, xn->ensure_grad().data(), rows, d_out, d_in, true);
                           }
                           if (wn->requires_grad) {
                             gemm(xn->data.data(), true, g, false, wn->ensure_grad().data(), d_in, rows, d_out, true);
                           }
                           if (bn->requires_grad) {
                             auto gb = bn->ensure_grad();
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t j = 0; j < d_out; ++j) gb[j] += g[r * d_out + j];
                             }
                           }
                         });
  }
  return result;
}

template <typename T>
BasicTensor<T> mean_pool(const BasicTensor<T>& x) {
  if (x.rank() < 2) throw DimensionError("mean_pool needs [..., tokens, d], got " + shape_str(x.shape()));
  const std::size_t d = x.dim(-1);
  const std::size_t tokens = x.dim(-2);
  const std::size_t outer = x.numel() / (d * tokens);
  Shape out_shape(x.shape().begin(), x.shape().end() - 2);
  out_shape.push_back(d);
  Buffer<T> out(outer * d, T(0));
  const auto xd = x.data();
  const T inv = T(1) / static_cast<T>(tokens);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < tokens; ++t) {
      for (std::size_t j = 0; j < d; ++j) out[o * d + j] += xd[(o * tokens + t) * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) out[o * d + j] *= inv;
  }
  auto result = detail::make_result(std::move(out_shape), std::move(out), {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("mean_pool", result, [xn = x.node(), on = result.node().get(), outer, tokens, d, inv]() {
      auto gx = xn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t t = 0; t < tokens; ++t) {
          for (std::size_t j = 0; j < d; ++j) gx[(o * tokens + t) * d + j] += on->grad[o * d + j] * inv;
        }
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  // Each 64-bit draw supplies two 32-bit uniforms; an element is kept when its
  // uniform is >= rate * 2^32.
  const auto threshold = static_cast<std::uint64_t>(std::llround(rate * 4294967296.0));
  std::vector<std::uint8_t> mask(x.numel());
  for (std::size_t i = 0; i < mask.size(); i += 2) {
    const std::uint64_t r = rng.next_u64();
    mask[i] = (r & 0xffffffffULL) >= threshold;
    if (i + 1 < mask.size()) mask[i + 1] = (r >> 32) >= threshold;
  }
  Buffer<T> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] ? xd[i] * keep_scale : T(0);
  auto result = detail::make_result(x.shape(), std::move(out), {&x});
  if (result.requires_grad()) {
    detail::record_op<T>("dropout", result,
                         [xn = x.node(), on = result.node().get(), mask = std::move(mask), keep_scale]() {
      auto gx = xn->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (mask[i]) gx[i] += on->grad[i] * keep_scale;
      }
    });
  }
  return result;
}

#define NEUROFLAG_INSTANTIATE_OPS(T)                                                                     \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                             \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                             \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                             \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                               \
  template BasicTensor<T> add_bias(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                    \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                                   \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                          \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                              \
  template BasicTensor<T> permute(const BasicTensor<T>&, const std::vector<std::size_t>&);               \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                         \
  template BasicTensor<T> concat(const std::vector<BasicTensor<T>>&, std::ptrdiff_t);                    \
  template std::vector<BasicTensor<T>> split(const BasicTensor<T>&, std::ptrdiff_t,                      \
                                             const std::vector<std::size_t>&);                           \
  template BasicTensor<T> softmax(const BasicTensor<T>&, std::ptrdiff_t);                                \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                     T);                                                                 \
  template BasicTensor<T> gelu(const BasicTensor<T>&);                                                   \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> mean_pool(const BasicTensor<T>&);                                              \
  template BasicTensor<T> dropout(const BasicTensor<T>&, double, bool, Rng&);

NEUROFLAG_INSTANTIATE_OPS(float)
NEUROFLAG_INSTANTIATE_OPS(double)

#undef NEUROFLAG_INSTANTIATE_OPS

}  // namespace neuroflag::tensor
