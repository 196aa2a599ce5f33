#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "neuroflag/allocator.hpp"
#include "neuroflag/cloth/simulator.hpp"
#include "neuroflag/cloth/topology.hpp"
#include "neuroflag/model/animator.hpp"
#include "neuroflag/tensor/ops.hpp"
#include "neuroflag/train/huber.hpp"

using namespace neuroflag;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 eng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(eng);
  return v;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = tensor::Tensor::from_data({n, n}, noise(n * n, 1));
  const auto b = tensor::Tensor::from_data({n, n}, noise(n * n, 2));
  for (auto _ : state) benchmark::DoNotOptimize(tensor::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(128)->Arg(512);

void BM_ClothStep(benchmark::State& state) {
  const cloth::ClothConfig cfg;
  const auto topo = cloth::SpringTopology::grid(cfg.rows, cfg.cols, cfg.spacing);
  const auto wind = cloth::default_wind(cloth::WindCondition::strong);
  auto s = cloth::initial_state(cfg, 42);
  for (auto _ : state) {
    s = cloth::step(s, cfg, wind, topo);
    benchmark::DoNotOptimize(s.positions.data());
  }
}
BENCHMARK(BM_ClothStep);

void BM_Forward(benchmark::State& state) {
  const model::ModelConfig cfg;
  const auto params = model::init_params<float>(cfg, 0);
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto x = tensor::Tensor::from_data({b, 64, 11, 11, 3}, noise(b * 64 * 363, 3));
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(params, cfg, x));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_TrainStepGradient(benchmark::State& state) {
  const model::ModelConfig cfg;
  auto params = model::init_params<float>(cfg, 0);
  params.set_requires_grad(true);
  const auto x = tensor::Tensor::from_data({32, 64, 11, 11, 3}, noise(32 * 64 * 363, 4));
  const auto y = tensor::Tensor::from_data({32, 1, 11, 11, 3}, noise(32 * 363, 5));
  for (auto _ : state) {
    params.zero_grad();
    const auto loss = train::huber_loss(model::forward(params, cfg, x), y);
    tensor::backward(loss);
  }
}
BENCHMARK(BM_TrainStepGradient)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
