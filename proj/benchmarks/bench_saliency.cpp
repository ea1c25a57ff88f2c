#include <benchmark/benchmark.h>

#include "mmdyn/norm_attention.hpp"
#include "random.hpp"

namespace {

mmdyn::LayerTensors random_layer(std::size_t T, std::size_t d, std::size_t H) {
  return {bench::causal_attention(H, T, 1),         bench::random_tensor({T, d}, 2),
          bench::random_tensor({d, d}, 3, -0.1f, 0.1f), bench::random_tensor({d}, 4),
          bench::random_tensor({d, d}, 5, -0.1f, 0.1f), bench::random_tensor({d}, 6)};
}

void BM_NormSaliencyLastToken(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const mmdyn::LayerTensors layer = random_layer(T, d, 8);
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::norm_saliency(layer, 1, T - 1));
}
BENCHMARK(BM_NormSaliencyLastToken)->ArgsProduct({{64, 256, 576}, {256, 512}})->Unit(benchmark::kMillisecond);

void BM_HeadTransform(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const mmdyn::LayerTensors layer = random_layer(T, 256, 8);
  for (auto _ : state) benchmark::DoNotOptimize(mmdyn::head_transform(layer.attn_input.matrix(), layer.w_v, layer.b_v, layer.w_o, 8, 3));
}
BENCHMARK(BM_HeadTransform)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
