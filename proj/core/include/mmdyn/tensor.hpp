#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace mmdyn {

/// Read-only view of a dense row-major matrix.
class MatrixView {
 public:
  MatrixView() = default;
  MatrixView(std::span<const float> data, std::size_t rows, std::size_t cols)
      : data_(data), rows_(rows), cols_(cols) {
    assert(data.size() == rows * cols);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return data_.subspan(i * cols_, cols_);
  }
  float operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

 private:
  std::span<const float> data_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

/// Owning dense float32 tensor, row-major.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<float> d)
      : shape(std::move(s)), data(std::move(d)) {}
  explicit Tensor(std::vector<std::size_t> s);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }

  /// Rank-2 view. Rank-3 tensors [A,B,C] are viewed as [A*B, C].
  MatrixView matrix() const;

  /// View of the 2-D slice `index` along the leading axis of a rank-3 tensor.
  MatrixView slice(std::size_t index) const;
};

std::size_t element_count(std::span<const std::size_t> shape) noexcept;

}  // namespace mmdyn
