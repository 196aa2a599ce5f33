#include "neuroflag/diagnostics/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "neuroflag/model/animator.hpp"
#include "neuroflag/model/params.hpp"
#include "neuroflag/rng.hpp"
#include "neuroflag/tensor/ops.hpp"
#include "neuroflag/train/huber.hpp"

namespace neuroflag::diagnostics {

namespace {

using tensor::BasicTensor;
using tensor::Shape;
namespace ops = tensor;

template <typename T>
BasicTensor<T> random(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<T> v(tensor::shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(scale * rng.normal());
  return BasicTensor<T>::from_data(std::move(shape), std::move(v), requires_grad);
}

/// Scalar probe sum(y * w) with a fixed random w, so every output element gets a distinct weight.
template <typename T>
class Probe {
 public:
  explicit Probe(std::uint64_t seed) : seed_(seed) {}
  BasicTensor<T> operator()(const BasicTensor<T>& y) {
    if (!w_.defined() || w_.shape() != y.shape()) {
      Rng rng(seed_);
      w_ = random<T>(y.shape(), rng, 1.0, false);
    }
    return ops::sum(ops::mul(y, w_));
  }

 private:
  std::uint64_t seed_;
  BasicTensor<T> w_;
};

/// Central step for double: truncation error O(h^2), rounding noise O(eps / h).
constexpr double kStep64 = 1e-5;

GradcheckCase run(std::string name, double tol, const std::function<BasicTensor<double>()>& f,
                  std::vector<BasicTensor<double>> params) {
  tensor::GradcheckOptions opts;
  opts.step = kStep64;
  GradcheckCase c{std::move(name), "f64", tol, {}};
  c.result = tensor::gradcheck<double>(f, std::move(params), opts);
  return c;
}

}  // namespace

model::ModelConfig reduced_gradcheck_config() {
  model::ModelConfig cfg;
  cfg.grid_rows = 2;
  cfg.grid_cols = 2;
  cfg.history_len = 4;
  cfg.projection_dim = 8;
  cfg.num_heads = 2;
  cfg.num_layers = 1;
  return cfg;
}

std::vector<GradcheckCase> op_gradchecks(double tol, std::uint64_t seed) {
  using T = double;
  Rng rng(seed);
  Probe<T> probe(seed + 1);
  std::vector<GradcheckCase> out;

  auto a = random<T>({3, 4}, rng);
  auto b = random<T>({3, 4}, rng);
  out.push_back(run("add", tol, [&] { return probe(ops::add(a, b)); }, {a, b}));
  out.push_back(run("sub", tol, [&] { return probe(ops::sub(a, b)); }, {a, b}));
  out.push_back(run("mul", tol, [&] { return probe(ops::mul(a, b)); }, {a, b}));
  auto s1 = random<T>({1}, rng);
  out.push_back(run("mul_scalar", tol, [&] { return probe(ops::mul(a, s1)); }, {a, s1}));
  out.push_back(run("scale", tol, [&] { return probe(ops::scale(a, T(-1.7))); }, {a}));
  auto bias = random<T>({4}, rng);
  out.push_back(run("add_bias", tol, [&] { return probe(ops::add_bias(a, bias)); }, {a, bias}));
  out.push_back(run("sum", tol, [&] { return ops::sum(ops::mul(a, b)); }, {a, b}));
  out.push_back(run("mean", tol, [&] { return ops::mean(ops::mul(a, a)); }, {a}));

  auto m1 = random<T>({2, 3, 4}, rng);
  auto m2 = random<T>({2, 4, 5}, rng);
  out.push_back(run("matmul", tol, [&] { return probe(ops::matmul(m1, m2)); }, {m1, m2}));
  out.push_back(run("transpose", tol, [&] { return probe(ops::transpose(m1)); }, {m1}));
  auto p4 = random<T>({2, 3, 4, 2}, rng);
  out.push_back(run("permute", tol, [&] { return probe(ops::permute(p4, {0, 2, 1, 3})); }, {p4}));
  out.push_back(run("reshape", tol, [&] { return probe(ops::reshape(p4, {6, 8})); }, {p4}));
  auto c1 = random<T>({2, 3}, rng);
  auto c2 = random<T>({2, 2}, rng);
  out.push_back(run("concat", tol, [&] { return probe(ops::concat<T>({c1, c2}, -1)); }, {c1, c2}));
  out.push_back(run("split", tol,
                    [&] {
                      const auto parts = ops::split(m1, 1, {1, 2});
                      return ops::add(probe(parts[0]), ops::sum(ops::mul(parts[1], parts[1])));
                    },
                    {m1}));

  auto sm = random<T>({2, 5, 3}, rng);
  out.push_back(run("softmax_last", tol, [&] { return probe(ops::softmax(sm, -1)); }, {sm}));
  out.push_back(run("softmax_inner", tol, [&] { return probe(ops::softmax(sm, 1)); }, {sm}));

  auto ln_x = random<T>({3, 6}, rng);
  auto gamma = random<T>({6}, rng, 0.5);
  auto beta = random<T>({6}, rng, 0.5);
  out.push_back(run("layer_norm", tol, [&] { return probe(ops::layer_norm(ln_x, gamma, beta, T(1e-6))); },
                    {ln_x, gamma, beta}));
  out.push_back(run("gelu", tol, [&] { return probe(ops::gelu(ln_x)); }, {ln_x}));

  auto dx = random<T>({2, 3, 5}, rng);
  auto dw = random<T>({5, 4}, rng);
  auto db = random<T>({4}, rng);
  out.push_back(run("dense", tol, [&] { return probe(ops::dense(dx, dw, db)); }, {dx, dw, db}));
  out.push_back(run("mean_pool", tol, [&] { return probe(ops::mean_pool(dx)); }, {dx}));
  out.push_back(run("dropout", tol,
                    [&] {
                      Rng drop(seed + 2);
                      return probe(ops::dropout(dx, 0.3, true, drop));
                    },
                    {dx}));

  // Residuals kept at least 0.1 away from the knee, where the loss is only C1.
  auto pred = random<T>({4, 5}, rng);
  std::vector<T> tv(pred.numel());
  for (std::size_t i = 0; i < tv.size(); ++i) {
    double r = 1.5 * rng.normal();
    if (std::abs(std::abs(r) - 1.0) < 0.1) r = r > 0 ? r + 0.25 : r - 0.25;
    tv[i] = pred[i] - static_cast<T>(r);
  }
  auto target = BasicTensor<T>::from_data({4, 5}, std::move(tv), true);
  out.push_back(run("huber_loss", tol, [&] { return train::huber_loss(pred, target, 1.0); }, {pred, target}));

  const auto cfg = reduced_gradcheck_config();
  auto params = model::init_params<T>(cfg, seed + 3);
  for (auto& t : params.tensors()) {
    auto v = t.mutable_data();
    for (auto& x : v) x += static_cast<T>(0.3 * rng.normal());
  }
  auto tokens = random<T>({2, cfg.num_patches(), cfg.projection_dim}, rng);
  const auto block = model::BlockParams<T>::from(params, 0);
  out.push_back(run("multi_head_attention", tol,
                    [&] {
                      return probe(model::multi_head_attention(tokens, block.attn, cfg.num_heads, 0.0, {}));
                    },
                    {tokens, block.attn.wq, block.attn.bq, block.attn.wk, block.attn.bk, block.attn.wv, block.attn.bv,
                     block.attn.wo, block.attn.bo}));
  out.push_back(run("transformer_block", tol, [&] { return probe(model::transformer_block(tokens, block, cfg, {})); },
                    {tokens, block.ln1_gamma, block.ln1_beta, block.ln2_gamma, block.ln2_beta, block.fc1_w,
                     block.fc1_b, block.fc2_w, block.fc2_b}));
  auto traj = random<T>({2, cfg.history_len, cfg.num_patches(), cfg.coords}, rng);
  const auto& ew = params.get("embed.weight");
  const auto& eb = params.get("embed.bias");
  const auto& pos = params.get("pos_table");
  out.push_back(run("trajectory_embed", tol, [&] { return probe(model::trajectory_embed(traj, ew, eb)); },
                    {traj, ew, eb}));
  out.push_back(run("positional_encode", tol, [&] { return probe(model::positional_encode(tokens, pos)); },
                    {tokens, pos}));
  return out;
}

namespace {

template <typename T>
GradcheckCase end_to_end(double tol, std::uint64_t seed, tensor::GradcheckOptions opts) {
  const auto cfg = reduced_gradcheck_config();
  Rng rng(seed);
  auto params = model::init_params<T>(cfg, seed + 5);
  for (auto& t : params.tensors()) {
    auto v = t.mutable_data();
    for (auto& x : v) x += static_cast<T>(0.2 * rng.normal());
  }
  const auto x = random<T>({3, cfg.history_len, cfg.grid_rows, cfg.grid_cols, cfg.coords}, rng, 0.5, false);
  const auto y = random<T>({3, 1, cfg.grid_rows, cfg.grid_cols, cfg.coords}, rng, 0.5, false);
  const auto f = [&] {
    Rng drop(seed + 6);
    const auto pred = model::forward(params, cfg, x, {true, &drop});
    return train::huber_loss(pred, y, 1.0);
  };
  GradcheckCase c{"end_to_end_loss", sizeof(T) == 8 ? "f64" : "f32", tol, {}};
  c.result = tensor::gradcheck<T>(f, params.tensors(), opts);
  return c;
}

}  // namespace

std::vector<GradcheckCase> end_to_end_gradchecks(double tol64, double tol32, std::uint64_t seed) {
  tensor::GradcheckOptions opts64;
  opts64.step = kStep64;
  // Float32 evaluation noise (~1e-7 relative on the loss) dominates small
  // differences, so the 32-bit check uses a wider step and a gradient floor.
  tensor::GradcheckOptions opts32;
  opts32.step = 1e-2;
  opts32.abs_floor = 1e-3;
  return {end_to_end<double>(tol64, seed, opts64), end_to_end<float>(tol32, seed, opts32)};
}

}  // namespace neuroflag::diagnostics
