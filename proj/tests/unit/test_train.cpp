#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "neuroflag/error.hpp"
#include "neuroflag/model/params.hpp"
#include "neuroflag/tensor/ops.hpp"
#include "neuroflag/train/adam.hpp"
#include "neuroflag/train/huber.hpp"
#include "neuroflag/train/trainer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace neuroflag;
using namespace neuroflag::train;
using tensor::Tensor;
using tensor::Tensor64;

namespace {

/// Value and slope of the Huber loss at a single residual, via the tape.
std::pair<double, double> huber_at(double r, double delta) {
  auto pred = Tensor64::from_data({1}, {r}, true);
  auto loss = huber_loss(pred, Tensor64::zeros({1}), delta);
  tensor::backward(loss);
  return {loss.item(), pred.grad()[0]};
}

dataset::WindowSet training_windows() {
  return testing::pooled_windows({testing::flag_frames(3, 3, 120, cloth::WindCondition::strong)}, 8);
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("Huber loss values") {
    CHECK(huber_at(0.5, 1.0).first == doctest::Approx(0.125));
    CHECK(huber_at(2.0, 1.0).first == doctest::Approx(1.5));
    CHECK(huber_at(-2.0, 1.0).first == doctest::Approx(1.5));
    CHECK(huber_value(0.5, 1.0) == doctest::Approx(0.125));
    auto loss = huber_loss(Tensor::from_data({2}, {0.5f, 3.0f}), Tensor::from_data({2}, {0.0f, 1.0f}));
    CHECK(loss.item() == doctest::Approx((0.125 + 1.5) / 2));
    CHECK_THROWS_AS(huber_loss(Tensor::zeros({2}), Tensor::zeros({2}), 0.0), ParameterError);
    CHECK_THROWS_AS(huber_loss(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  }

  TEST_CASE("property: Huber knee continuity in value and slope") {
    for (double delta : {0.1, 1.0, 2.5}) {
      for (double sign : {1.0, -1.0}) {
        const auto below = huber_at(sign * (delta - 1e-6), delta);
        const auto above = huber_at(sign * (delta + 1e-6), delta);
        // Across the knee the value moves by slope * 2e-6 up to a second-order term.
        CHECK(std::abs(std::abs(above.first - below.first) - 2e-6 * delta) < 1e-10);
        CHECK(std::abs(above.second - below.second - sign * 1e-6) < 1e-10);
      }
    }
  }

  TEST_CASE("property: Huber symmetry and oracle agreement") {
    const auto r = testing::random_doubles(200, 3, -4.0, 4.0);
    for (double x : r) {
      CHECK(huber_value(x, 1.3) == huber_value(-x, 1.3));
      CHECK(huber_value(x, 1.3) == doctest::Approx(oracle::huber(x, 1.3)));
    }
  }

  TEST_CASE("Huber gradient flows into both arguments") {
    auto p = Tensor64::from_data({2}, {0.3, 2.0}, true);
    auto t = Tensor64::from_data({2}, {0.0, 0.0}, true);
    tensor::backward(huber_loss(p, t, 1.0));
    CHECK(p.grad()[0] == doctest::Approx(0.15));
    CHECK(p.grad()[1] == doctest::Approx(0.5));
    CHECK(t.grad()[0] == doctest::Approx(-0.15));
  }

  TEST_CASE("Adam: first step moves each weight by -lr * sign(g)") {
    model::ModelParams<float> params;
    params.add("w", Tensor::from_data({3}, {1.0f, -2.0f, 0.5f}, true));
    auto st = make_optimizer_state(params);
    auto loss = sum(tensor::mul(params.get("w"), Tensor::from_data({3}, {2.0f, -0.5f, 4.0f})));
    tensor::backward(loss);
    AdamConfig cfg;
    cfg.learning_rate = 1e-3;
    adam_step(params, st, cfg);
    const auto w = params.get("w").data();
    CHECK(w[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
    CHECK(w[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
    CHECK(st.t == 1);
  }

  TEST_CASE("Adam: zero learning rate and zero gradients leave weights bit-identical") {
    model::ModelParams<float> params;
    params.add("w", Tensor::from_data({2}, {0.3f, -0.7f}, true));
    auto st = make_optimizer_state(params);
    const std::vector<float> before(params.get("w").data().begin(), params.get("w").data().end());

    tensor::backward(sum(tensor::mul(params.get("w"), params.get("w"))));
    AdamConfig zero_lr;
    zero_lr.learning_rate = 0.0;
    adam_step(params, st, zero_lr);
    CHECK(std::vector<float>(params.get("w").data().begin(), params.get("w").data().end()) == before);

    auto st2 = make_optimizer_state(params);
    params.zero_grad();
    tensor::backward(sum(tensor::mul(params.get("w"), Tensor::zeros({2}))));
    adam_step(params, st2, AdamConfig{});
    CHECK(std::vector<float>(params.get("w").data().begin(), params.get("w").data().end()) == before);
  }

  TEST_CASE("Adam: missing gradient names the parameter and changes nothing") {
    model::ModelParams<float> params;
    params.add("a", Tensor::from_data({1}, {1.0f}, true));
    params.add("b", Tensor::from_data({1}, {2.0f}, true));
    auto st = make_optimizer_state(params);
    tensor::backward(sum(params.get("a")));
    try {
      adam_step(params, st, AdamConfig{});
      FAIL("expected UsageError");
    } catch (const UsageError& e) {
      CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
    CHECK(params.get("a").data()[0] == 1.0f);
    CHECK(st.t == 0);
    AdamConfig bad;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
  }

  TEST_CASE("Adam matches a scalar reference over several steps") {
    model::ModelParams<float> params;
    params.add("w", Tensor::from_data({1}, {0.8f}, true));
    auto st = make_optimizer_state(params);
    const AdamConfig cfg{0.05, 0.9, 0.999, 1e-8};
    double m = 0.0, v = 0.0;
    for (int t = 1; t <= 20; ++t) {
      // loss = w^3, gradient 3 w^2
      params.zero_grad();
      const auto x = params.get("w");
      const double w = x.data()[0];
      tensor::backward(sum(tensor::mul(tensor::mul(x, x), x)));
      adam_step(params, st, cfg);
      const double g = 3.0 * w * w;
      m = cfg.beta1 * m + (1 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
      const double mh = m / (1 - std::pow(cfg.beta1, t));
      const double vh = v / (1 - std::pow(cfg.beta2, t));
      const double expected = w - cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
      CHECK(params.get("w").data()[0] == doctest::Approx(expected).epsilon(1e-5));
    }
    CHECK(st.t == 20);
  }

  TEST_CASE("batches hold windows in model layout") {
    const auto ws = training_windows();
    const std::vector<std::size_t> idx{4, 1};
    const auto b = make_batch(ws, idx);
    CHECK(b.inputs.shape() == tensor::Shape{2, 8, 3, 3, 3});
    CHECK(b.targets.shape() == tensor::Shape{2, 1, 3, 3, 3});
    const auto w = ws[1];
    CHECK(std::equal(w.target.begin(), w.target.end(), b.targets.data().begin() + 27));
  }

  TEST_CASE("trainer rejects windows that do not fit the model") {
    const auto ws = training_windows();
    TrainConfig tc;
    tc.batch_size = 8;
    auto mc = testing::small_model(16);
    CHECK_THROWS_AS(Trainer(mc, tc, ws), ConfigMismatchError);
    tc.batch_size = 10'000;
    CHECK_THROWS_AS(Trainer(testing::small_model(), tc, ws), UsageError);
    tc.batch_size = 0;
    CHECK_THROWS_AS(Trainer(testing::small_model(), tc, ws), ParameterError);
  }

  TEST_CASE("trainer reduces the loss on a small problem") {
    const auto ws = training_windows();
    TrainConfig tc;
    tc.batch_size = 16;
    tc.adam.learning_rate = 3e-3;
    tc.max_steps = 150;
    tc.val_interval = 50;
    tc.seed = 3;
    Trainer trainer(testing::small_model(), tc, ws, &ws);
    const double initial = evaluate_loss(trainer.params(), testing::small_model(), ws, 1.0);
    const auto log = trainer.run();
    REQUIRE(log.entries.size() == 150);
    CHECK(log.entries[0].val_loss.has_value());
    CHECK_FALSE(log.entries[1].val_loss.has_value());
    CHECK(log.entries[100].val_loss.has_value());
    CHECK(*log.entries[0].val_loss == doctest::Approx(initial));
    CHECK(trainer.validation_loss() < 0.5 * initial);
    const auto csv = log.to_csv();
    CHECK(csv.rfind("step,train_loss,val_loss\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 151);
  }

  TEST_CASE("epochs drop the final partial batch") {
    const auto ws = training_windows();
    TrainConfig tc;
    tc.batch_size = 10;
    tc.epochs = 2;
    Trainer trainer(testing::small_model(), tc, ws);
    CHECK(trainer.steps_per_epoch() == ws.size() / 10);
    CHECK(trainer.total_steps() == 2 * (ws.size() / 10));
  }

  TEST_CASE("identical seeds give identical trajectories, and resume continues exactly") {
    const auto ws = training_windows();
    TrainConfig tc;
    tc.batch_size = 8;
    tc.adam.learning_rate = 1e-3;
    tc.max_steps = 24;
    tc.seed = 11;
    auto mc = testing::small_model();
    mc.dropout_rate = 0.2;

    Trainer a(mc, tc, ws);
    const auto log_a = a.run();
    Trainer b(mc, tc, ws);
    const auto log_b = b.run();
    CHECK(log_a.to_csv() == log_b.to_csv());
    CHECK(model::encode_checkpoint(a.checkpoint()) == model::encode_checkpoint(b.checkpoint()));

    Trainer first(mc, tc, ws);
    for (int k = 0; k < 13; ++k) first.step();
    const auto bytes = model::encode_checkpoint(first.checkpoint());
    Trainer second(mc, tc, ws);
    second.resume(model::decode_checkpoint(bytes));
    CHECK(second.steps_done() == 13);
    second.run();
    CHECK(model::encode_checkpoint(second.checkpoint()) == model::encode_checkpoint(a.checkpoint()));
    for (std::size_t k = 0; k < second.log().entries.size(); ++k) {
      CHECK(second.log().entries[k].train_loss == log_a.entries[13 + k].train_loss);
    }

    auto other = mc;
    other.num_layers = 2;
    Trainer mismatched(other, tc, ws);
    CHECK_THROWS_AS(mismatched.resume(a.checkpoint()), ConfigMismatchError);
  }

  TEST_CASE("a non-finite loss raises TrainingDivergedError and leaves parameters untouched") {
    const auto ws = training_windows();
    TrainConfig tc;
    tc.batch_size = 8;
    tc.max_steps = 5;
    Trainer trainer(testing::small_model(), tc, ws);
    trainer.params().get("head.bias").mutable_data()[0] = std::numeric_limits<float>::infinity();
    const auto before = model::encode_checkpoint(trainer.checkpoint());
    CHECK_THROWS_AS(trainer.step(), TrainingDivergedError);
    CHECK(model::encode_checkpoint(trainer.checkpoint()) == before);
    CHECK(tensor::GradTape<float>::current().size() == 0);
  }
}
