#include <benchmark/benchmark.h>

#include "mmdyn/logit_lens.hpp"
#include "random.hpp"

namespace {

constexpr std::size_t kDim = 256;

mmdyn::HeadTensors random_head(std::size_t V) {
  mmdyn::HeadTensors head;
  head.unembedding = bench::random_tensor({V, kDim}, 1);
  head.norm_gamma = bench::random_tensor({kDim}, 2, 0.5f, 1.5f);
  head.norm_beta = bench::random_tensor({kDim}, 3, -0.1f, 0.1f);
  return head;
}

void BM_DecodeHidden(benchmark::State& state) {
  const auto V = static_cast<std::size_t>(state.range(0));
  const mmdyn::HeadTensors head = random_head(V);
  const mmdyn::Tensor h = bench::random_tensor({kDim}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::decode_hidden(h.data, head, mmdyn::kDefaultTopK));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DecodeHidden)->RangeMultiplier(4)->Range(1024, 65536)->Complexity(benchmark::oN);

void BM_ApplyFinalNorm(benchmark::State& state) {
  const mmdyn::HeadTensors head = random_head(4);
  const mmdyn::Tensor h = bench::random_tensor({kDim}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::apply_final_norm(h.data, head));
}
BENCHMARK(BM_ApplyFinalNorm);

void BM_NormalizeWord(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::normalize_word("\xE2\x96\x81Streets"));
}
BENCHMARK(BM_NormalizeWord);

}  // namespace
