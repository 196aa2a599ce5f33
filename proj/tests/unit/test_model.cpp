#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "neuroflag/dataset/windows.hpp"
#include "neuroflag/error.hpp"
#include "neuroflag/model/animator.hpp"
#include "neuroflag/model/checkpoint.hpp"
#include "neuroflag/model/config.hpp"
#include "neuroflag/model/params.hpp"
#include "neuroflag/tensor/ops.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace neuroflag;
using namespace neuroflag::model;
using tensor::Shape;
using tensor::Tensor;
using tensor::Tensor64;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.grid_rows = 2;
  cfg.grid_cols = 2;
  cfg.history_len = 4;
  cfg.projection_dim = 8;
  cfg.num_heads = 2;
  cfg.num_layers = 2;
  cfg.mlp_expansion = 2;
  return cfg;
}

/// Replaces every parameter with uniform noise so biases and norms are exercised.
template <typename T>
void randomize(ModelParams<T>& params, std::uint64_t seed, double scale = 0.5) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto v = params.tensors()[i].mutable_data();
    const auto r = testing::random_doubles(v.size(), seed + i, -scale, scale);
    std::copy(r.begin(), r.end(), v.begin());
  }
}

std::vector<double> values(const Tensor64& t) { return {t.data().begin(), t.data().end()}; }

oracle::Matrix as_matrix(const Tensor64& t) { return oracle::matrix(t.dim(0), t.dim(1), values(t)); }

oracle::AttentionWeights attention_weights(const AttentionParams<double>& p) {
  return {as_matrix(p.wq), as_matrix(p.wk), as_matrix(p.wv), as_matrix(p.wo),
          values(p.bq),    values(p.bk),    values(p.bv),    values(p.bo)};
}

/// Straight-line pre-norm block on one sequence.
oracle::Matrix block_oracle(const oracle::Matrix& x, const BlockParams<double>& p, const ModelConfig& cfg) {
  const auto h1 = oracle::layer_norm(x, values(p.ln1_gamma), values(p.ln1_beta), cfg.layer_norm_eps);
  auto x2 = oracle::attention(h1, attention_weights(p.attn), cfg.num_heads);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j) x2[i][j] += x[i][j];
  const auto h2 = oracle::layer_norm(x2, values(p.ln2_gamma), values(p.ln2_beta), cfg.layer_norm_eps);
  auto m = oracle::affine(h2, as_matrix(p.fc1_w), values(p.fc1_b));
  for (auto& row : m)
    for (auto& v : row) v = oracle::gelu(v);
  auto out = oracle::affine(m, as_matrix(p.fc2_w), values(p.fc2_b));
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < out[i].size(); ++j) out[i][j] = oracle::gelu(out[i][j]) + x2[i][j];
  return out;
}

Tensor64 random_input(const ModelConfig& cfg, std::size_t batch, std::uint64_t seed) {
  const Shape shape{batch, cfg.history_len, cfg.grid_rows, cfg.grid_cols, cfg.coords};
  return Tensor64::from_data(shape, testing::random_doubles(tensor::shape_numel(shape), seed));
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("default configuration") {
    const ModelConfig cfg;
    CHECK(cfg.grid_rows == 11);
    CHECK(cfg.grid_cols == 11);
    CHECK(cfg.history_len == 64);
    CHECK(cfg.projection_dim == 128);
    CHECK(cfg.num_heads == 8);
    CHECK(cfg.key_dim() == 16);
    CHECK(cfg.num_layers == 8);
    CHECK(cfg.mlp_dim() == 512);
    CHECK(cfg.num_patches() == 121);
    CHECK(cfg.token_dim() == 192);
    CHECK(cfg.output_dim() == 363);
    CHECK_NOTHROW(cfg.validate());
    ModelConfig bad;
    bad.num_heads = 7;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
  }

  TEST_CASE("parameter count matches the closed form and the expected band") {
    const ModelConfig cfg;
    const std::size_t expected = oracle::parameter_count(121, 64, 3, 128, 8, 512);
    CHECK(expected == 1'673'451);
    CHECK(cfg.parameter_count() == expected);
    const auto params = init_params<float>(cfg, 1);
    CHECK(params.parameter_count() == expected);
    CHECK(expected >= 1'550'000);
    CHECK(expected <= 1'700'000);
    const auto tiny = tiny_config();
    CHECK(init_params<float>(tiny, 1).parameter_count() == oracle::parameter_count(4, 4, 3, 8, 2, 16));
  }

  TEST_CASE("parameter names are unique and follow the layout") {
    const auto cfg = tiny_config();
    const auto params = init_params<float>(cfg, 3);
    const auto layout = parameter_layout(cfg);
    REQUIRE(params.size() == layout.size());
    std::set<std::string> names;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      CHECK(params.names()[i] == layout[i].first);
      CHECK(params.tensors()[i].shape() == layout[i].second);
      CHECK(names.insert(layout[i].first).second);
    }
    CHECK(params.contains("blocks.1.attn.q.weight"));
    CHECK_THROWS_AS(params.get("nope"), UsageError);
  }

  TEST_CASE("initialization is seeded and follows the declared scheme") {
    const ModelConfig cfg;
    const auto a = init_params<float>(cfg, 7);
    const auto b = init_params<float>(cfg, 7);
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(std::equal(a.tensors()[i].data().begin(), a.tensors()[i].data().end(), b.tensors()[i].data().begin()));
    }
    const auto& w = a.get("blocks.0.attn.q.weight");
    double sumsq = 0.0;
    for (float v : w.data()) {
      CHECK(std::abs(v) < 0.04f);
      sumsq += static_cast<double>(v) * v;
    }
    const double sd = std::sqrt(sumsq / static_cast<double>(w.numel()));
    CHECK(sd > 0.014);
    CHECK(sd < 0.02);
    for (float v : a.get("blocks.3.ln1.gamma").data()) CHECK(v == 1.0f);
    for (float v : a.get("final_ln.beta").data()) CHECK(v == 0.0f);
    for (float v : a.get("head.bias").data()) CHECK(v == 0.0f);
  }

  TEST_CASE("trajectory embedding") {
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 2);
    const auto& w = params.get("embed.weight");
    auto zero = trajectory_embed(Tensor64::zeros({1, 4, 2, 2, 3}), w, Tensor64::zeros({8}));
    CHECK(zero.shape() == Shape{1, 4, 8});
    for (double v : zero.data()) CHECK(v == 0.0);

    // Token 0 and token 3 share a trajectory.
    auto x = random_input(cfg, 1, 5);
    auto data = values(x);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 3; ++c) data[(t * 4 + 3) * 3 + c] = data[(t * 4 + 0) * 3 + c];
    auto e = trajectory_embed(Tensor64::from_data(x.shape(), data), w, params.get("embed.bias"));
    for (std::size_t j = 0; j < 8; ++j) CHECK(e[j] == e[3 * 8 + j]);

    // Time-major flattening: token n's row is (t0.xyz, t1.xyz, ...).
    std::vector<double> token0;
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 3; ++c) token0.push_back(data[(t * 4 + 0) * 3 + c]);
    const auto ref = oracle::affine({token0}, as_matrix(w), values(params.get("embed.bias")));
    for (std::size_t j = 0; j < 8; ++j) CHECK(e[j] == doctest::Approx(ref[0][j]).epsilon(1e-12));

    // Positional offsets make identical trajectories distinguishable.
    auto table = Tensor64::from_data({4, 8}, testing::random_doubles(32, 8));
    auto p = positional_encode(e, table);
    CHECK(p[0] != p[3 * 8]);
    auto same = positional_encode(e, Tensor64::zeros({4, 8}));
    CHECK(values(same) == values(e));
  }

  TEST_CASE("single-token attention is the value projection through the output map") {
    ModelConfig cfg = tiny_config();
    auto params = init_params<double>(cfg, 4);
    randomize(params, 40);
    const auto p = BlockParams<double>::from(params, 0).attn;
    const auto xv = testing::random_doubles(8, 41);
    auto y = multi_head_attention(Tensor64::from_data({1, 1, 8}, xv), p, 2, 0.0, {});
    const auto v = oracle::affine({xv}, as_matrix(p.wv), values(p.bv));
    const auto ref = oracle::affine(v, as_matrix(p.wo), values(p.bo));
    for (std::size_t j = 0; j < 8; ++j) CHECK(y[j] == doctest::Approx(ref[0][j]).epsilon(1e-12));
  }

  TEST_CASE("two-token single-head attention matches a hand-set oracle") {
    const std::size_t d = 2;
    AttentionParams<double> p;
    p.wq = Tensor64::from_data({d, d}, {1.0, 0.5, -0.5, 2.0});
    p.wk = Tensor64::from_data({d, d}, {0.3, -1.0, 1.0, 0.2});
    p.wv = Tensor64::from_data({d, d}, {2.0, 0.0, 1.0, -1.0});
    p.wo = Tensor64::from_data({d, d}, {1.0, 1.0, 0.0, 1.0});
    p.bq = Tensor64::from_data({d}, {0.1, -0.2});
    p.bk = Tensor64::from_data({d}, {0.0, 0.3});
    p.bv = Tensor64::from_data({d}, {-0.5, 0.5});
    p.bo = Tensor64::from_data({d}, {0.25, 0.0});
    const std::vector<double> x{0.7, -1.2, 1.5, 0.4};
    auto y = multi_head_attention(Tensor64::from_data({1, 2, d}, x), p, 1, 0.0, {});
    const auto ref = oracle::attention(oracle::matrix(2, d, x), attention_weights(p), 1);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < d; ++j) CHECK(y[i * d + j] == doctest::Approx(ref[i][j]).epsilon(1e-13));
  }

  TEST_CASE("multi-head attention matches the oracle on random weights") {
    ModelConfig cfg = tiny_config();
    cfg.projection_dim = 16;
    cfg.num_heads = 4;
    auto params = init_params<double>(cfg, 6);
    randomize(params, 60);
    const auto p = BlockParams<double>::from(params, 1).attn;
    const std::size_t n = 5;
    const auto xv = testing::random_doubles(2 * n * 16, 61);
    auto y = multi_head_attention(Tensor64::from_data({2, n, 16}, xv), p, 4, 0.0, {});
    for (std::size_t b = 0; b < 2; ++b) {
      const auto ref = oracle::attention(
          oracle::matrix(n, 16, {xv.begin() + static_cast<long>(b * n * 16), xv.begin() + static_cast<long>((b + 1) * n * 16)}),
          attention_weights(p), 4);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 16; ++j) CHECK(y[(b * n + i) * 16 + j] == doctest::Approx(ref[i][j]).epsilon(1e-12));
    }
  }

  TEST_CASE("transformer block matches the straight-line oracle") {
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 9);
    randomize(params, 90);
    const auto p = BlockParams<double>::from(params, 0);
    const auto xv = testing::random_doubles(4 * 8, 91, -2.0, 2.0);
    auto y = transformer_block(Tensor64::from_data({1, 4, 8}, xv), p, cfg, {});
    const auto ref = block_oracle(oracle::matrix(4, 8, xv), p, cfg);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(y[i * 8 + j] - ref[i][j]) < 1e-5);
    // Float path agrees with the same oracle.
    auto yf = transformer_block(Tensor64::from_data({1, 4, 8}, xv).cast<float>(),
                                BlockParams<float>::from(params.cast<float>(), 0), cfg, {});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(yf[i * 8 + j] - ref[i][j]) < 1e-4);
  }

  TEST_CASE("block with zeroed branches is the identity") {
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 10);
    auto p = BlockParams<double>::from(params, 0);
    for (auto* t : {&p.attn.wq, &p.attn.wk, &p.attn.wv, &p.attn.wo, &p.attn.bo, &p.fc1_w, &p.fc1_b, &p.fc2_w, &p.fc2_b}) {
      for (auto& v : t->mutable_data()) v = 0.0;
    }
    const auto xv = testing::random_doubles(3 * 4 * 8, 11);
    auto y = transformer_block(Tensor64::from_data({3, 4, 8}, xv), p, cfg, {});
    CHECK(values(y) == xv);
  }

  TEST_CASE("property: permutation equivariance without positional offsets") {
    const auto cfg = tiny_config();
    auto params = init_params<double>(cfg, 12);
    randomize(params, 120, 0.3);
    for (auto& v : params.get("pos_table").mutable_data()) v = 0.0;
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto x = random_input(cfg, 2, 130 + seed);
      auto xv = values(x);
      std::vector<double> xp(xv.size());
      // (B, H, N, C): token axis is 2 once rows x cols is flattened.
      const std::size_t N = 4, C = 3, H = cfg.history_len;
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t t = 0; t < H; ++t)
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c)
              xp[((b * H + t) * N + n) * C + c] = xv[((b * H + t) * N + perm[n]) * C + c];
      auto xpt = Tensor64::from_data(x.shape(), xp);
      auto z = encode(params, cfg, x);
      auto zp = encode(params, cfg, xpt);
      const std::size_t d = cfg.projection_dim;
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t j = 0; j < d; ++j)
            CHECK(zp[(b * N + n) * d + j] == doctest::Approx(z[(b * N + perm[n]) * d + j]).epsilon(1e-10));
      auto y = forward(params, cfg, x);
      auto yp = forward(params, cfg, xpt);
      for (std::size_t i = 0; i < y.numel(); ++i) CHECK(yp[i] == doctest::Approx(y[i]).epsilon(1e-10));
    }
  }

  TEST_CASE("forward maps (B, 64, 11, 11, 3) to (B, 1, 11, 11, 3)") {
    const ModelConfig cfg;
    const auto params = init_params<float>(cfg, 1);
    for (std::size_t batch : {1u, 3u}) {
      const Shape in{batch, 64, 11, 11, 3};
      auto x = Tensor::from_data(in, testing::random_floats(tensor::shape_numel(in), batch));
      auto y = forward(params, cfg, x);
      CHECK(y.shape() == Shape{batch, 1, 11, 11, 3});
      for (float v : y.data()) REQUIRE(std::isfinite(v));
      auto again = forward(params, cfg, x);
      CHECK(std::equal(y.data().begin(), y.data().end(), again.data().begin()));
      // The (121, 3) token view and the grid view hold the same numbers.
      const auto grid = std::vector<float>(y.data().begin(), y.data().begin() + 363);
      CHECK(dataset::tokens_to_grid(dataset::grid_to_tokens(grid)) == grid);
    }
    CHECK_THROWS_AS(forward(params, cfg, Tensor::zeros({1, 32, 11, 11, 3})), DimensionError);
  }

  TEST_CASE("training-mode forward depends on the dropout stream") {
    auto cfg = tiny_config();
    cfg.dropout_rate = 0.5;
    auto params = init_params<double>(cfg, 14);
    randomize(params, 140);
    auto x = random_input(cfg, 2, 141);
    Rng r1(5), r2(5), r3(6);
    auto a = forward(params, cfg, x, {.training = true, .rng = &r1});
    auto b = forward(params, cfg, x, {.training = true, .rng = &r2});
    auto c = forward(params, cfg, x, {.training = true, .rng = &r3});
    CHECK(values(a) == values(b));
    CHECK(values(a) != values(c));
    CHECK_THROWS_AS(forward(params, cfg, x, {.training = true, .rng = nullptr}), UsageError);
  }

  TEST_CASE("non-finite activations name the failing stage") {
    const auto cfg = tiny_config();
    auto x = random_input(cfg, 1, 15);
    auto check_layer = [&](const std::string& name, int layer) {
      auto params = init_params<double>(cfg, 16);
      params.get(name).mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
      try {
        forward(params, cfg, x);
        FAIL("expected NumericFailureError");
      } catch (const NumericFailureError& e) {
        CHECK(e.layer() == layer);
      }
    };
    check_layer("embed.bias", -1);
    check_layer("blocks.1.mlp.fc2.bias", 1);
    check_layer("head.bias", 2);
  }

  TEST_CASE("checkpoints round trip byte-stably") {
    testing::TempDir dir("ckpt");
    const auto cfg = tiny_config();
    Checkpoint ck;
    ck.config = cfg;
    ck.params = init_params<float>(cfg, 7);
    ck.step = 42;
    ck.train_fingerprint = 0x1234;
    ck.rng_state = Rng(3).serialize();
    ck.optimizer.t = 42;
    for (const auto& t : ck.params.tensors()) {
      ck.optimizer.m.push_back(testing::random_floats(t.numel(), 1));
      ck.optimizer.v.push_back(testing::random_floats(t.numel(), 2, 0.0f, 1.0f));
    }
    const auto bytes = encode_checkpoint(ck);
    const auto back = decode_checkpoint(bytes);
    CHECK(back.config == cfg);
    CHECK(back.step == 42);
    CHECK(back.train_fingerprint == 0x1234);
    CHECK(back.rng_state == ck.rng_state);
    CHECK(back.optimizer == ck.optimizer);
    CHECK(encode_checkpoint(back) == bytes);

    save_checkpoint(ck, dir.file("a.nfck"));
    const auto loaded = load_checkpoint(dir.file("a.nfck"), &cfg);
    auto x = random_input(cfg, 2, 17).cast<float>();
    auto y0 = forward(ck.params, cfg, x);
    auto y1 = forward(loaded.params, cfg, x);
    CHECK(std::equal(y0.data().begin(), y0.data().end(), y1.data().begin()));

    // Same seed, same file.
    Checkpoint again;
    again.config = cfg;
    again.params = init_params<float>(cfg, 7);
    Checkpoint fresh = again;
    fresh.params = init_params<float>(cfg, 7);
    CHECK(encode_checkpoint(again) == encode_checkpoint(fresh));

    auto other = cfg;
    other.num_layers = 3;
    CHECK_THROWS_AS(load_checkpoint(dir.file("a.nfck"), &other), ConfigMismatchError);

    auto broken = bytes;
    broken.resize(broken.size() - 5);
    CHECK_THROWS_AS(decode_checkpoint(broken), FormatError);
    broken = bytes;
    broken[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(broken), FormatError);
  }
}
