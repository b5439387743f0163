#include <benchmark/benchmark.h>

#include "dimcollapse/dynamics.hpp"
#include "dimcollapse/infonce.hpp"
#include "dimcollapse/models.hpp"
#include "dimcollapse/numerics.hpp"
#include "dimcollapse/synthdata.hpp"

namespace {

namespace dc = dimcollapse;

dc::synthdata::Batch make_batch(int n, double k) {
  dc::synthdata::AugmentationSpec aug;
  aug.amplitude = k;
  return dc::synthdata::sample_batch({}, aug, n, 42);
}

void BM_InfonceEvaluate(benchmark::State& state) {
  const auto batch = make_batch(static_cast<int>(state.range(0)), 1.0);
  const dc::infonce::EmbeddingBatch emb{batch.X, batch.Xp, false};
  for (auto _ : state) benchmark::DoNotOptimize(dc::infonce::evaluate(emb));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_InfonceEvaluate)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_BuildX(benchmark::State& state) {
  const auto batch = make_batch(static_cast<int>(state.range(0)), 1.0);
  const auto w = dc::infonce::softmax_weights({batch.X, batch.Xp, false});
  for (auto _ : state) benchmark::DoNotOptimize(dc::infonce::build_X(batch, w));
}
BENCHMARK(BM_BuildX)->Arg(128)->Arg(512);

void BM_TrainStep(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  dc::dynamics::FlowConfig cfg;
  cfg.batch_size = static_cast<int>(state.range(1));
  cfg.learning_rate = 1e-4;
  dc::dynamics::Trainer trainer(dc::models::init_stack(16, depth, {}), {}, {}, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_TrainStep)->Args({1, 256})->Args({1, 512})->Args({2, 512})->Args({3, 256});

void BM_Svd16(benchmark::State& state) {
  const auto w = dc::models::init_stack(16, 1, {}).layers.front();
  for (auto _ : state) benchmark::DoNotOptimize(dc::numerics::svd(w));
}
BENCHMARK(BM_Svd16);

void BM_SingularVectorRates(benchmark::State& state) {
  const auto stack = dc::models::init_stack(16, 2, {});
  const dc::Matrix wdot = stack.layers[1] - stack.layers[0];
  for (auto _ : state) benchmark::DoNotOptimize(dc::dynamics::singular_vector_rates(stack.layers[0], wdot));
}
BENCHMARK(BM_SingularVectorRates);

}  // namespace
BENCHMARK_MAIN();
