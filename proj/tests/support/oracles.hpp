#pragma once

// Naive reference implementations written straight from the formulas. They
// share no code with the library: plain nested loops over std::vector,
// long double accumulation, full sorts instead of partial ones.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const std::vector<float>& flat, std::size_t rows, std::size_t cols) {
  Matrix m(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = flat[i * cols + j];
  return m;
}

inline long double dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<long double>(a[k]) * b[k];
  return s;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return static_cast<double>(dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b))));
}

/// Mean cosine over the full cross product of rows [v0, v1) x [t0, t1).
inline double inter(const Matrix& h, std::size_t v0, std::size_t v1, std::size_t t0, std::size_t t1) {
  long double s = 0;
  for (std::size_t i = v0; i < v1; ++i)
    for (std::size_t j = t0; j < t1; ++j) s += cosine(h[i], h[j]);
  return static_cast<double>(s / ((v1 - v0) * (t1 - t0)));
}

/// Mean cosine over unordered pairs of rows in [a, b).
inline double intra(const Matrix& h, std::size_t a, std::size_t b) {
  long double s = 0;
  std::size_t pairs = 0;
  for (std::size_t i = a; i < b; ++i)
    for (std::size_t j = a; j < b; ++j)
      if (i < j) {
        s += cosine(h[i], h[j]);
        ++pairs;
      }
  return static_cast<double>(s / pairs);
}

struct MeanSigma {
  std::vector<double> mean;
  std::vector<double> sigma;
};

/// Per-column mean and population standard deviation (two-pass, long double).
inline MeanSigma mean_sigma(const std::vector<std::vector<double>>& curves) {
  const std::size_t n = curves.front().size();
  MeanSigma out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t l = 0; l < n; ++l) {
    long double s = 0;
    for (const auto& c : curves) s += c[l];
    const long double mu = s / curves.size();
    long double ss = 0;
    for (const auto& c : curves) ss += (c[l] - mu) * (c[l] - mu);
    out.mean[l] = static_cast<double>(mu);
    out.sigma[l] = static_cast<double>(std::sqrt(ss / curves.size()));
  }
  return out;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.front().size(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < b.size(); ++k) s += static_cast<long double>(a[i][k]) * b[k][j];
      c[i][j] = static_cast<double>(s);
    }
  return c;
}

/// f^h(X) = ((X W_V + 1 b_V) P_h) W_O, with P_h the diagonal 0/1 mask keeping
/// the columns of head h.
inline Matrix head_transform(const Matrix& x, const Matrix& w_v, const std::vector<double>& b_v, const Matrix& w_o,
                             std::size_t heads, std::size_t h) {
  const std::size_t d = w_v.size();
  const std::size_t dh = d / heads;
  Matrix value = matmul(x, w_v);
  for (auto& row : value)
    for (std::size_t c = 0; c < d; ++c) row[c] = (c / dh == h) ? row[c] + b_v[c] : 0.0;
  return matmul(value, w_o);
}

/// ||sum_h alpha[h][q][j] f^h(x_j)|| for every key j.
inline std::vector<double> saliency(const Matrix& x, const std::vector<Matrix>& alpha, const Matrix& w_v,
                                    const std::vector<double>& b_v, const Matrix& w_o, std::size_t q) {
  const std::size_t heads = alpha.size();
  const std::size_t T = x.size();
  const std::size_t d = w_v.size();
  std::vector<Matrix> f;
  for (std::size_t h = 0; h < heads; ++h) f.push_back(head_transform(x, w_v, b_v, w_o, heads, h));
  std::vector<double> out(T);
  for (std::size_t j = 0; j < T; ++j) {
    std::vector<double> v(d, 0.0);
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t c = 0; c < d; ++c) v[c] += alpha[h][q][j] * f[h][j][c];
    out[j] = std::sqrt(static_cast<double>(dot(v, v)));
  }
  return out;
}

inline std::vector<double> layernorm(const std::vector<double>& h, const std::vector<double>& gamma,
                                     const std::vector<double>& beta, double eps) {
  const std::size_t d = h.size();
  long double mu = 0;
  for (double x : h) mu += x;
  mu /= d;
  long double var = 0;
  for (double x : h) var += (x - mu) * (x - mu);
  var /= d;
  std::vector<double> out(d);
  for (std::size_t k = 0; k < d; ++k)
    out[k] = static_cast<double>(gamma[k] * (h[k] - mu) / std::sqrt(var + eps) + beta[k]);
  return out;
}

inline std::vector<double> rmsnorm(const std::vector<double>& h, const std::vector<double>& gamma, double eps) {
  const std::size_t d = h.size();
  long double ms = 0;
  for (double x : h) ms += static_cast<long double>(x) * x;
  ms /= d;
  std::vector<double> out(d);
  for (std::size_t k = 0; k < d; ++k) out[k] = static_cast<double>(gamma[k] * h[k] / std::sqrt(ms + eps));
  return out;
}

/// Indices of the k largest scores by full stable sort; equal scores keep
/// ascending index order.
inline std::vector<std::size_t> argsort_top(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(k);
  return idx;
}

/// Logits U x for every vocabulary row.
inline std::vector<double> logits(const Matrix& u, const std::vector<double>& x) {
  std::vector<double> out;
  for (const auto& row : u) out.push_back(static_cast<double>(dot(row, x)));
  return out;
}

}  // namespace oracle
