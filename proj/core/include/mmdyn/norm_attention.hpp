#pragma once

// Norm-based attention saliency: attention weight scaled by the size of the
// value-then-output transformed key vector, ||sum_h alpha^h[i,j] f^h(x_j)||.

#include <string>
#include <vector>

#include "mmdyn/dump_io.hpp"
#include "mmdyn/tensor.hpp"

namespace mmdyn {

enum class SaliencyMode {
  HeadSum,     // ||sum_h alpha^h f^h(x_j)||
  PerHeadSum,  // sum_h ||alpha^h f^h(x_j)||, inspection only
};

struct SaliencyMap {
  std::size_t layer = 0;
  std::size_t query_index = 0;
  std::vector<double> values;  // length T, zero past query_index
};

struct SaliencyStack {
  std::size_t query_index = 0;
  std::vector<std::size_t> layers;  // decoder block index of each row
  std::vector<std::vector<double>> rows;

  std::size_t num_rows() const noexcept { return rows.size(); }
  std::size_t num_tokens() const noexcept { return rows.empty() ? 0 : rows.front().size(); }
};

/// f^h(x_j) = (x_j W_V + b_V)[h-th head slice] * W_O[h-th head rows], for
/// every row of x. Output is [T, d].
Tensor head_transform(const MatrixView& x, const Tensor& w_v, const Tensor& b_v, const Tensor& w_o,
                      std::size_t num_heads, std::size_t head);

/// Saliency of `query` toward every key of one decoder block. b_O is not part
/// of the transform. Heads are summed in order 0..H-1.
SaliencyMap norm_saliency(const LayerTensors& layer, std::size_t layer_index, std::size_t query,
                          SaliencyMode mode = SaliencyMode::HeadSum);

/// norm_saliency for the last token (T - 1) at blocks 1..L.
SaliencyStack last_token_saliency(const Dump& dump, unsigned threads = 1,
                                  SaliencyMode mode = SaliencyMode::HeadSum);

struct TopTokens {
  std::vector<std::vector<std::size_t>> per_layer;  // k indices per row
  std::vector<std::size_t> global;                  // k indices by summed saliency
  std::vector<double> global_scores;                // summed saliency of `global`
};

/// k largest saliencies per row and over the column sums; ties go to the lower
/// token index.
TopTokens top_attended_tokens(const SaliencyStack& stack, std::size_t k);

/// CSV matrix: header `layer,t0,t1,...`, one row per decoder block.
std::string saliency_to_csv(const SaliencyStack& stack);

}  // namespace mmdyn
