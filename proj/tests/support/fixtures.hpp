#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mmdyn/dump_io.hpp"
#include "mmdyn/tensor.hpp"

namespace fixtures {

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

using Rng = std::mt19937_64;

std::vector<float> uniform(Rng& rng, std::size_t n, float lo = -1.0f, float hi = 1.0f);
mmdyn::Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, float lo = -1.0f, float hi = 1.0f);
mmdyn::Tensor identity(std::size_t d);
mmdyn::Tensor zeros(std::vector<std::size_t> shape);

/// [H, T, T] causal row-stochastic attention with random weights.
mmdyn::Tensor causal_attention(Rng& rng, std::size_t heads, std::size_t tokens);

struct Geometry {
  std::size_t layers = 2;
  std::size_t tokens = 8;
  std::size_t dim = 8;
  std::size_t heads = 2;
  std::size_t vocab = 16;
};

/// Fully random but valid archive contents. Visual span is [0, T/2), text
/// span [T/2, T), vocab entries "▁tok{i}".
mmdyn::DumpData random_dump_data(Rng& rng, const Geometry& g);

/// Spec with a planted inter curve only; other fields keep their defaults.
mmdyn::SynthSpec curve_spec(std::vector<double> curve, std::size_t tokens = 16, std::size_t dim = 32);

/// Spec planting caption words with the given per-layer coverage.
mmdyn::SynthSpec caption_spec(std::size_t layers, std::vector<double> coverage);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Fig.-1 shape on L+1 points: rise to `a`, fall to `b`, rise to `c`, fall to L.
std::vector<double> four_phase_curve(std::size_t L, std::size_t a, std::size_t b, std::size_t c);

}  // namespace fixtures
