#include <benchmark/benchmark.h>

#include "mmdyn/contextualization.hpp"
#include "random.hpp"

namespace {

constexpr std::size_t kDim = 256;

void BM_InterModalSimilarity(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const mmdyn::Tensor h = bench::random_tensor({T, kDim}, 1);
  const mmdyn::ModalitySpan spans{{0, T / 2}, {T / 2, T}};
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::inter_modal_similarity(h.matrix(), spans));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_InterModalSimilarity)->RangeMultiplier(2)->Range(32, 1024)->Complexity(benchmark::oNSquared);

void BM_IntraModalSimilarity(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const mmdyn::Tensor h = bench::random_tensor({T, kDim}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::intra_modal_similarity(h.matrix(), {0, T}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_IntraModalSimilarity)->RangeMultiplier(2)->Range(32, 1024)->Complexity(benchmark::oNSquared);

void BM_SegmentPhases(benchmark::State& state) {
  const mmdyn::Tensor curve = bench::random_tensor({static_cast<std::size_t>(state.range(0))}, 3, -0.5f, 0.5f);
  const std::vector<double> values(curve.data.begin(), curve.data.end());
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::segment_phases(values));
}
BENCHMARK(BM_SegmentPhases)->Arg(32)->Arg(80)->Arg(256);

}  // namespace
