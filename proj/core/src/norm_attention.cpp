#include "mmdyn/norm_attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mmdyn/error.hpp"
#include "mmdyn/parallel.hpp"

namespace mmdyn {
namespace {

struct Geometry {
  std::size_t tokens;
  std::size_t dim;
  std::size_t heads;
  std::size_t head_dim;
};

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorCode::ShapeMismatch, what); }

Geometry check_projections(const MatrixView& x, const Tensor& w_v, const Tensor& b_v, const Tensor& w_o,
                           std::size_t heads) {
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0) shape_error(fmt::format("hidden size {} not divisible by {} heads", d, heads));
  const std::vector<std::size_t> square{d, d};
  const std::vector<std::size_t> vec{d};
  if (w_v.shape != square) shape_error(fmt::format("W_V shape [{}] != [{},{}]", fmt::join(w_v.shape, ","), d, d));
  if (w_o.shape != square) shape_error(fmt::format("W_O shape [{}] != [{},{}]", fmt::join(w_o.shape, ","), d, d));
  if (b_v.shape != vec) shape_error(fmt::format("b_V shape [{}] != [{}]", fmt::join(b_v.shape, ","), d));
  return {x.rows(), d, heads, d / heads};
}

/// value row = x_j W_V + b_V, in double.
void value_row(std::span<const float> x, const Tensor& w_v, const Tensor& b_v, std::vector<double>& out) {
  const std::size_t d = x.size();
  for (std::size_t c = 0; c < d; ++c) out[c] = b_v.data[c];
  for (std::size_t k = 0; k < d; ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const float* w = w_v.data.data() + k * d;
    for (std::size_t c = 0; c < d; ++c) out[c] += xk * w[c];
  }
}

/// acc += sum_{k in [k0, k1)} z[k] * W_O[k, :]
void project_rows(const std::vector<double>& z, const Tensor& w_o, std::size_t k0, std::size_t k1,
                  std::vector<double>& acc) {
  const std::size_t d = acc.size();
  for (std::size_t k = k0; k < k1; ++k) {
    const double zk = z[k];
    if (zk == 0.0) continue;
    const float* w = w_o.data.data() + k * d;
    for (std::size_t c = 0; c < d; ++c) acc[c] += zk * w[c];
  }
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

}  // namespace

Tensor head_transform(const MatrixView& x, const Tensor& w_v, const Tensor& b_v, const Tensor& w_o,
                      std::size_t num_heads, std::size_t head) {
  const Geometry g = check_projections(x, w_v, b_v, w_o, num_heads);
  if (head >= g.heads) shape_error(fmt::format("head {} out of range 0..{}", head, g.heads - 1));
  Tensor out({g.tokens, g.dim});
  std::vector<double> value(g.dim);
  std::vector<double> acc(g.dim);
  const std::size_t k0 = head * g.head_dim;
  for (std::size_t j = 0; j < g.tokens; ++j) {
    value_row(x.row(j), w_v, b_v, value);
    std::fill(acc.begin(), acc.end(), 0.0);
    project_rows(value, w_o, k0, k0 + g.head_dim, acc);
    for (std::size_t c = 0; c < g.dim; ++c) out.data[j * g.dim + c] = static_cast<float>(acc[c]);
  }
  return out;
}

SaliencyMap norm_saliency(const LayerTensors& layer, std::size_t layer_index, std::size_t query,
                          SaliencyMode mode) {
  const MatrixView x = layer.attn_input.matrix();
  if (layer.attn_input.rank() != 2) shape_error("attn_input must be [T, d]");
  const std::size_t heads = layer.attn_probs.rank() == 3 ? layer.attn_probs.shape[0] : 0;
  const Geometry g = check_projections(x, layer.w_v, layer.b_v, layer.w_o, heads);
  if (layer.attn_probs.shape != std::vector<std::size_t>{g.heads, g.tokens, g.tokens}) {
    shape_error(fmt::format("attn_probs shape [{}] does not match T={}", fmt::join(layer.attn_probs.shape, ","),
                            g.tokens));
  }
  if (query >= g.tokens) shape_error(fmt::format("query {} >= T={}", query, g.tokens));

  SaliencyMap map{layer_index, query, std::vector<double>(g.tokens, 0.0)};
  std::vector<double> value(g.dim);
  std::vector<double> scaled(g.dim);
  std::vector<double> acc(g.dim);
  std::vector<double> alpha(g.heads);
  for (std::size_t j = 0; j <= query; ++j) {
    bool any = false;
    for (std::size_t h = 0; h < g.heads; ++h) {
      alpha[h] = layer.attn_probs.slice(h)(query, j);
      any = any || alpha[h] != 0.0;
    }
    if (!any) continue;
    value_row(x.row(j), layer.w_v, layer.b_v, value);
    for (std::size_t c = 0; c < g.dim; ++c) scaled[c] = alpha[c / g.head_dim] * value[c];
    if (mode == SaliencyMode::HeadSum) {
      std::fill(acc.begin(), acc.end(), 0.0);
      project_rows(scaled, layer.w_o, 0, g.dim, acc);
      map.values[j] = norm2(acc);
    } else {
      double total = 0.0;
      for (std::size_t h = 0; h < g.heads; ++h) {
        std::fill(acc.begin(), acc.end(), 0.0);
        project_rows(scaled, layer.w_o, h * g.head_dim, (h + 1) * g.head_dim, acc);
        total += norm2(acc);
      }
      map.values[j] = total;
    }
  }
  return map;
}

SaliencyStack last_token_saliency(const Dump& dump, unsigned threads, SaliencyMode mode) {
  const std::size_t L = dump.num_layers();
  SaliencyStack stack;
  stack.query_index = dump.num_tokens() - 1;
  stack.layers.resize(L);
  stack.rows.resize(L);
  parallel_for(L, threads, [&](std::size_t r) {
    const std::size_t l = r + 1;
    try {
      SaliencyMap map = norm_saliency(dump.layer(l), l, stack.query_index, mode);
      stack.layers[r] = l;
      stack.rows[r] = std::move(map.values);
    } catch (const Error& e) {
      throw e.annotate(fmt::format("layer {}", l));
    }
  });
  return stack;
}

TopTokens top_attended_tokens(const SaliencyStack& stack, std::size_t k) {
  const std::size_t T = stack.num_tokens();
  if (k < 1 || k > T) throw Error(ErrorCode::BadK, fmt::format("k={} outside [1, {}]", k, T));
  TopTokens out;
  std::vector<double> totals(T, 0.0);
  for (const auto& row : stack.rows) {
    out.per_layer.push_back(top_k_indices(row, k));
    for (std::size_t j = 0; j < T; ++j) totals[j] += row[j];
  }
  out.global = top_k_indices(totals, k);
  for (std::size_t j : out.global) out.global_scores.push_back(totals[j]);
  return out;
}

std::string saliency_to_csv(const SaliencyStack& stack) {
  std::string out = "layer";
  for (std::size_t j = 0; j < stack.num_tokens(); ++j) out += fmt::format(",t{}", j);
  out += '\n';
  for (std::size_t r = 0; r < stack.num_rows(); ++r) {
    out += fmt::format("{}", stack.layers[r]);
    for (double v : stack.rows[r]) out += fmt::format(",{}", v);
    out += '\n';
  }
  return out;
}

}  // namespace mmdyn
