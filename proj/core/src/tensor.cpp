#include "mmdyn/tensor.hpp"

#include <functional>
#include <numeric>

namespace mmdyn {

std::size_t element_count(std::span<const std::size_t> shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  data.assign(element_count(shape), 0.0f);
}

MatrixView Tensor::matrix() const {
  if (shape.empty()) return {};
  if (shape.size() == 1) return MatrixView(data, 1, shape[0]);
  const std::size_t cols = shape.back();
  return MatrixView(data, data.size() / cols, cols);
}

MatrixView Tensor::slice(std::size_t index) const {
  assert(shape.size() == 3 && index < shape[0]);
  const std::size_t stride = shape[1] * shape[2];
  return MatrixView(std::span<const float>(data).subspan(index * stride, stride),
                    shape[1], shape[2]);
}

}  // namespace mmdyn
