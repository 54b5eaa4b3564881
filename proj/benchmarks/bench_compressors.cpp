#include <benchmark/benchmark.h>

#include "fedzo/compressors.hpp"

using namespace fedzo;

namespace {

NumVec make_input(std::size_t dim) {
  RngStream rng(7);
  return rng.gaussian_vector(dim);
}

void run(benchmark::State& state, const CompressorSpec& spec) {
  const NumVec x = make_input(static_cast<std::size_t>(state.range(0)));
  const CompressorSpec resolved = spec.resolved(x.size());
  RngStream rng(11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compress(resolved, x, rng));
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

static void BM_TopK(benchmark::State& state) {
  run(state, CompressorSpec::parse("topk:0.5"));
}
BENCHMARK(BM_TopK)->RangeMultiplier(4)->Range(40, 40 << 8)->Complexity();

static void BM_RandK(benchmark::State& state) {
  run(state, CompressorSpec::parse("randk:0.5"));
}
BENCHMARK(BM_RandK)->RangeMultiplier(4)->Range(40, 40 << 8)->Complexity();

static void BM_DropoutBiased(benchmark::State& state) {
  run(state, CompressorSpec::dropout_biased(0.5));
}
BENCHMARK(BM_DropoutBiased)->RangeMultiplier(4)->Range(40, 40 << 8)->Complexity();

static void BM_Qsgd1b(benchmark::State& state) { run(state, CompressorSpec::qsgd(1)); }
BENCHMARK(BM_Qsgd1b)->RangeMultiplier(4)->Range(40, 40 << 8)->Complexity();

static void BM_GaussianVector(benchmark::State& state) {
  RngStream rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rng.gaussian_vector(state.range(0)));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GaussianVector)->RangeMultiplier(4)->Range(40, 40 << 8)->Complexity();

static void BM_EstimateContraction(benchmark::State& state) {
  const CompressorSpec spec = CompressorSpec::parse("randk:0.5");
  RngStream rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_contraction(spec, 40, state.range(0), rng));
  }
}
BENCHMARK(BM_EstimateContraction)->Arg(100)->Arg(500);

BENCHMARK_MAIN();
