#pragma once

#include <random>
#include <vector>

#include "mmdyn/tensor.hpp"

namespace bench {

inline mmdyn::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, float lo = -1.0f,
                                   float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  mmdyn::Tensor t(std::move(shape));
  for (float& v : t.data) v = dist(rng);
  return t;
}

/// Causal, row-stochastic attention of shape [H, T, T].
inline mmdyn::Tensor causal_attention(std::size_t heads, std::size_t tokens, std::uint64_t seed) {
  mmdyn::Tensor t = random_tensor({heads, tokens, tokens}, seed, 0.05f, 1.0f);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < tokens; ++i) {
      float* row = t.data.data() + (h * tokens + i) * tokens;
      float sum = 0.0f;
      for (std::size_t j = 0; j < tokens; ++j) {
        if (j > i) row[j] = 0.0f;
        sum += row[j];
      }
      for (std::size_t j = 0; j <= i; ++j) row[j] /= sum;
    }
  return t;
}

}  // namespace bench
