#include <doctest.h>

#include <cmath>
#include <numeric>

#include "neuroflag/error.hpp"
#include "neuroflag/tensor/gradcheck.hpp"
#include "neuroflag/tensor/ops.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace neuroflag;
using namespace neuroflag::tensor;

namespace {

Tensor64 random64(Shape shape, std::uint64_t seed, bool grad = true) {
  const auto n = shape_numel(shape);
  return Tensor64::from_data(std::move(shape), testing::random_doubles(n, seed), grad);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("construction and shape queries") {
    auto t = Tensor::zeros({2, 3, 4});
    CHECK(t.rank() == 3);
    CHECK(t.numel() == 24);
    CHECK(t.dim(-1) == 4);
    CHECK(t.dim(0) == 2);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f}), DimensionError);
    CHECK(Tensor::scalar(3.5f).item() == 3.5f);
  }

  TEST_CASE("elementwise ops reject mismatched shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(mul(a, b), DimensionError);
    CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 3})), DimensionError);
  }

  TEST_CASE("matmul matches a naive product") {
    const auto av = testing::random_doubles(2 * 3 * 4, 1);
    const auto bv = testing::random_doubles(2 * 4 * 5, 2);
    auto c = matmul(Tensor64::from_data({2, 3, 4}, av), Tensor64::from_data({2, 4, 5}, bv));
    REQUIRE(c.shape() == Shape{2, 3, 5});
    for (std::size_t b = 0; b < 2; ++b) {
      const auto ref = oracle::matmul(oracle::matrix(3, 4, {av.begin() + b * 12, av.begin() + b * 12 + 12}),
                                      oracle::matrix(4, 5, {bv.begin() + b * 20, bv.begin() + b * 20 + 20}));
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(c[b * 15 + i * 5 + j] == doctest::Approx(ref[i][j]).epsilon(1e-12));
    }
  }

  TEST_CASE("softmax of [1, 2, 3]") {
    auto y = softmax(Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}), -1);
    CHECK(y[0] == doctest::Approx(0.0900).epsilon(1e-3));
    CHECK(y[1] == doctest::Approx(0.2447).epsilon(1e-3));
    CHECK(y[2] == doctest::Approx(0.6652).epsilon(1e-3));
  }

  TEST_CASE("softmax is stable for large logits") {
    auto y = softmax(Tensor::from_data({2}, {1000.0f, 1000.0f}), -1);
    CHECK(y[0] == doctest::Approx(0.5));
    CHECK(y[1] == doctest::Approx(0.5));
  }

  TEST_CASE("property: softmax rows sum to one along any axis") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Shape shape{3, 5, 7};
      const auto data = testing::random_floats(shape_numel(shape), seed, -20.0f, 20.0f);
      for (std::ptrdiff_t axis : {0, 1, 2}) {
        auto y = softmax(Tensor::from_data(shape, data), axis);
        std::size_t outer = 1, inner = 1;
        for (std::ptrdiff_t a = 0; a < axis; ++a) outer *= shape[static_cast<std::size_t>(a)];
        for (std::size_t a = static_cast<std::size_t>(axis) + 1; a < 3; ++a) inner *= shape[a];
        const std::size_t len = shape[static_cast<std::size_t>(axis)];
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
              const float v = y[(o * len + k) * inner + i];
              CHECK(v >= 0.0f);
              s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
          }
        }
      }
    }
  }

  TEST_CASE("GELU reference values") {
    auto y = gelu(Tensor64::from_data({3}, {1.0, 0.0, -1.0}));
    CHECK(y[0] == doctest::Approx(0.8412).epsilon(1e-4));
    CHECK(y[1] == 0.0);
    CHECK(y[2] == doctest::Approx(oracle::gelu(-1.0)).epsilon(1e-12));
    auto yf = gelu(Tensor::from_data({1}, {1.0f}));
    CHECK(yf[0] == doctest::Approx(oracle::gelu(1.0)).epsilon(1e-6));
  }

  TEST_CASE("property: layer norm output has zero mean and unit variance") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::size_t rows = 6, d = 32;
      const auto data = testing::random_doubles(rows * d, seed, -5.0, 5.0);
      auto y = layer_norm(Tensor64::from_data({rows, d}, data), Tensor64::full({d}, 1.0), Tensor64::zeros({d}), 1e-6);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += y[r * d + j];
        mean /= d;
        for (std::size_t j = 0; j < d; ++j) var += (y[r * d + j] - mean) * (y[r * d + j] - mean);
        var /= d;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("layer norm matches the reference with affine parameters") {
    const std::size_t rows = 3, d = 8;
    const auto x = testing::random_doubles(rows * d, 5);
    const auto g = testing::random_doubles(d, 6);
    const auto b = testing::random_doubles(d, 7);
    auto y = layer_norm(Tensor64::from_data({rows, d}, x), Tensor64::from_data({d}, g), Tensor64::from_data({d}, b),
                        1e-6);
    const auto ref = oracle::layer_norm(oracle::matrix(rows, d, x), g, b, 1e-6);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < d; ++j) CHECK(y[r * d + j] == doctest::Approx(ref[r][j]).epsilon(1e-12));
    CHECK_THROWS_AS(layer_norm(Tensor64::from_data({rows, d}, x), Tensor64::full({d}, 1.0), Tensor64::zeros({d}), 0.0),
                    ParameterError);
  }

  TEST_CASE("permute, reshape, concat and split round trip") {
    const auto data = testing::random_floats(2 * 3 * 4, 3);
    auto x = Tensor::from_data({2, 3, 4}, data);
    auto p = permute(permute(x, {2, 0, 1}), {1, 2, 0});
    CHECK(std::equal(p.data().begin(), p.data().end(), data.begin()));
    CHECK(permute(x, {2, 0, 1}).shape() == Shape{4, 2, 3});
    CHECK_THROWS_AS(reshape(x, {5, 5}), DimensionError);
    auto parts = split(x, 1, {1, 2});
    REQUIRE(parts.size() == 2);
    CHECK(parts[1].shape() == Shape{2, 2, 4});
    auto joined = concat(parts, 1);
    CHECK(std::equal(joined.data().begin(), joined.data().end(), data.begin()));
  }

  TEST_CASE("mean pool averages the token axis") {
    auto y = mean_pool(Tensor::from_data({1, 2, 2}, {1.0f, 2.0f, 3.0f, 6.0f}));
    REQUIRE(y.shape() == Shape{1, 2});
    CHECK(y[0] == 2.0f);
    CHECK(y[1] == 4.0f);
  }

  TEST_CASE("dropout: identity at inference, inverted scaling in training") {
    Rng rng(3);
    auto x = Tensor::full({1000}, 1.0f);
    auto same = dropout(x, 0.1, false, rng);
    CHECK(same.node() == x.node());
    auto y = dropout(x, 0.1, true, rng);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
      if (y[i] != 0.0f) {
        CHECK(y[i] == doctest::Approx(1.0 / 0.9));
        ++kept;
      }
    }
    CHECK(kept > 850);
    CHECK(kept < 950);
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ParameterError);
  }

  TEST_CASE("tape: backward visits entries in reverse recording order") {
    auto& tape = GradTape<double>::current();
    tape.clear();
    auto a = Tensor64::from_data({2}, {1.0, 2.0}, true);
    auto b = Tensor64::from_data({2}, {3.0, 4.0}, true);
    auto c = mul(a, b);
    auto d = add(c, a);
    auto s = sum(d);
    REQUIRE(tape.size() == 3);
    CHECK(tape.op_names() == std::vector<std::string>{"mul", "add", "sum"});
    backward(s);
    CHECK(tape.last_visit_order() == std::vector<std::size_t>{2, 1, 0});
    CHECK(tape.size() == 0);
    // d/da = b + 1, d/db = a
    CHECK(a.grad()[0] == 4.0);
    CHECK(a.grad()[1] == 5.0);
    CHECK(b.grad()[0] == 1.0);
    CHECK(b.grad()[1] == 2.0);
    CHECK_FALSE(c.has_grad());
  }

  TEST_CASE("tape: gradients accumulate across fan-out") {
    auto x = Tensor64::from_data({1}, {3.0}, true);
    auto y = sum(add(mul(x, x), x));
    backward(y);
    CHECK(x.grad()[0] == 7.0);
  }

  TEST_CASE("tape: no recording under NoGradGuard") {
    auto& tape = GradTape<float>::current();
    tape.clear();
    auto x = Tensor::full({3}, 1.0f, true);
    {
      NoGradGuard guard;
      auto y = add(x, x);
      CHECK_FALSE(y.requires_grad());
    }
    CHECK(tape.size() == 0);
    CHECK(grad_enabled());
  }

  TEST_CASE("backward requires a scalar root") {
    auto x = Tensor64::from_data({2}, {1.0, 2.0}, true);
    auto y = mul(x, x);
    CHECK_THROWS_AS(backward(y), UsageError);
    GradTape<double>::current().clear();
  }

  TEST_CASE("mutable data is confined to leaves") {
    auto x = Tensor::full({2}, 1.0f, true);
    auto y = add(x, x);
    CHECK_NOTHROW(x.mutable_data()[0] = 2.0f);
    CHECK_THROWS_AS(y.mutable_data(), UsageError);
    GradTape<float>::current().clear();
  }

  TEST_CASE("gradcheck agrees on a composite function") {
    auto a = random64({3, 4}, 1);
    auto b = random64({4, 2}, 2);
    auto r = gradcheck<double>([&] { return sum(gelu(matmul(a, b))); }, {a, b}, {.step = 1e-5});
    CHECK(r.max_relative_error < 1e-6);
    CHECK(r.elements_checked == 20);
  }

  TEST_CASE("gradcheck rejects unseeded dropout") {
    auto x = random64({64}, 4);
    Rng rng = Rng::unseeded();
    CHECK_THROWS_AS(gradcheck<double>([&] { return sum(dropout(x, 0.5, true, rng)); }, {x}), NondeterminismError);
    GradTape<double>::current().clear();
  }

  TEST_CASE("gradcheck detects a wrong gradient") {
    // Stops gradient flow through the second factor, so d/dx x*x is reported as x.
    auto x = random64({4}, 9);
    auto r = gradcheck<double>([&] { return sum(mul(x, x.detach())); }, {x}, {.step = 1e-5});
    CHECK(r.max_relative_error > 0.4);
  }
}
