#pragma once

// Double-accumulated float kernels. The lane split is fixed, so results are
// bit-identical run to run regardless of how callers are scheduled.

#include <cstddef>
#include <span>

namespace mmdyn::detail {

inline double dot(std::span<const float> x, std::span<const float> y) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = x.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += double(x[k]) * y[k];
    s1 += double(x[k + 1]) * y[k + 1];
    s2 += double(x[k + 2]) * y[k + 2];
    s3 += double(x[k + 3]) * y[k + 3];
  }
  for (; k < n; ++k) s0 += double(x[k]) * y[k];
  return (s0 + s1) + (s2 + s3);
}

inline double squared_norm(std::span<const float> x) noexcept { return dot(x, x); }

}  // namespace mmdyn::detail
