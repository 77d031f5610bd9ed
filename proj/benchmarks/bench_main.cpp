// SPDX-License-Identifier: Apache-2.0
//
// Micro-benchmarks. The SPR/PEGO pair shows the cost gap between penalizing
// factor cross products and penalizing full update products.
#include <benchmark/benchmark.h>

#include "thanora/model.hpp"
#include "thanora/spr.hpp"
#include "thanora/task_prior.hpp"
#include "thanora/verify.hpp"

namespace {

using namespace thanora;

BlockAdapter bench_adapter(std::size_t d) {
  Rng rng(17);
  return random_adapter(d, d, {8, 8, 8, 8}, 4, rng);
}

void BM_SprLoss(benchmark::State& state) {
  const BlockAdapter adp = bench_adapter(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(spr_loss(adp));
}
BENCHMARK(BM_SprLoss)->Arg(64)->Arg(256)->Arg(1024);

void BM_SprGrad(benchmark::State& state) {
  const BlockAdapter adp = bench_adapter(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(spr_grad(adp));
}
BENCHMARK(BM_SprGrad)->Arg(64)->Arg(256)->Arg(1024);

void BM_PegoLoss(benchmark::State& state) {
  const BlockAdapter adp = bench_adapter(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pego_loss(adp));
}
BENCHMARK(BM_PegoLoss)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_ContextSvd(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const DenseMatrix w = gaussian_matrix(rng, d, d);
  const DenseMatrix g = gaussian_matrix(rng, d, d);
  const DenseMatrix c = (1.0 / double(d)) * matmul_nt(g, g) + 0.1 * DenseMatrix::identity(d);
  for (auto _ : state) benchmark::DoNotOptimize(context_svd(w, c, d / 2, 0.0));
}
BENCHMARK(BM_ContextSvd)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(9);
  const std::vector<std::size_t> dims{d, d, d};
  ModelSnapshot m = model_from_weights(random_base_weights(dims, BaseInit::orthogonal, 1), Nonlinearity::none);
  for (std::size_t l = 0; l < m.layers.size(); ++l) m.layers[l].adapter = random_adapter(d, d, {6, 3}, 4, rng);
  const DenseMatrix x = gaussian_matrix(rng, d, 32);
  const DenseMatrix y = gaussian_matrix(rng, d, 32);
  for (auto _ : state) {
    const ModelGradient g = backward(m, forward(m, x), y, 1e-2);
    sgd_step(m, g, 1e-6);
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
