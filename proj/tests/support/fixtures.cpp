#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace fixtures {

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = base / fmt::format("mmdyn_test_{:08x}_{}", rd(), counter++);
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("could not create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<float> uniform(Rng& rng, std::size_t n, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> out(n);
  for (float& v : out) v = dist(rng);
  return out;
}

mmdyn::Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, float lo, float hi) {
  const std::size_t n = mmdyn::element_count(shape);
  return mmdyn::Tensor(std::move(shape), uniform(rng, n, lo, hi));
}

mmdyn::Tensor identity(std::size_t d) {
  mmdyn::Tensor t({d, d});
  for (std::size_t i = 0; i < d; ++i) t.data[i * d + i] = 1.0f;
  return t;
}

mmdyn::Tensor zeros(std::vector<std::size_t> shape) { return mmdyn::Tensor(std::move(shape)); }

mmdyn::Tensor causal_attention(Rng& rng, std::size_t heads, std::size_t tokens) {
  mmdyn::Tensor a({heads, tokens, tokens});
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < tokens; ++i) {
      std::vector<double> w(i + 1);
      double total = 0.0;
      for (double& x : w) total += (x = dist(rng));
      for (std::size_t j = 0; j <= i; ++j) a.data[(h * tokens + i) * tokens + j] = static_cast<float>(w[j] / total);
    }
  }
  return a;
}

mmdyn::DumpData random_dump_data(Rng& rng, const Geometry& g) {
  mmdyn::DumpData data;
  data.model_name = "random";
  data.num_heads = g.heads;
  data.norm_kind = mmdyn::NormKind::LayerNorm;
  for (std::size_t i = 0; i < g.tokens; ++i) data.tokens.push_back(fmt::format("t{}", i));
  data.spans.visual = {0, g.tokens / 2};
  data.spans.text = {g.tokens / 2, g.tokens};
  for (std::size_t l = 0; l <= g.layers; ++l) data.hidden.push_back(random_tensor(rng, {g.tokens, g.dim}));
  for (std::size_t l = 1; l <= g.layers; ++l) {
    mmdyn::LayerTensors b;
    b.attn_probs = causal_attention(rng, g.heads, g.tokens);
    b.attn_input = random_tensor(rng, {g.tokens, g.dim});
    b.w_v = random_tensor(rng, {g.dim, g.dim});
    b.b_v = random_tensor(rng, {g.dim}, -0.1f, 0.1f);
    b.w_o = random_tensor(rng, {g.dim, g.dim});
    b.b_o = random_tensor(rng, {g.dim}, -0.1f, 0.1f);
    data.blocks.push_back(std::move(b));
  }
  data.head.unembedding = random_tensor(rng, {g.vocab, g.dim});
  data.head.norm_gamma = random_tensor(rng, {g.dim}, 0.5f, 1.5f);
  data.head.norm_beta = random_tensor(rng, {g.dim}, -0.1f, 0.1f);
  data.head.norm_kind = data.norm_kind;
  for (std::size_t v = 0; v < g.vocab; ++v) data.head.vocab.push_back(fmt::format("▁tok{}", v));
  data.caption = "a photo of tok1 and tok2";
  return data;
}

mmdyn::SynthSpec curve_spec(std::vector<double> curve, std::size_t tokens, std::size_t dim) {
  mmdyn::SynthSpec spec;
  spec.num_layers = curve.size() - 1;
  spec.num_tokens = tokens;
  spec.hidden_size = dim;
  spec.num_heads = 2;
  spec.vocab_size = 32;
  spec.inter_curve = std::move(curve);
  return spec;
}

mmdyn::SynthSpec caption_spec(std::size_t layers, std::vector<double> coverage) {
  mmdyn::SynthSpec spec = curve_spec(std::vector<double>(layers + 1, 0.1), 16, 32);
  spec.vocab_size = 48;
  spec.caption = "A red bus drives down the wet street with a tall tree";
  spec.caption_words = {"red", "bus", "drives", "wet", "street", "tall", "tree"};
  spec.word_coverage = std::move(coverage);
  return spec;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<double> four_phase_curve(std::size_t L, std::size_t a, std::size_t b, std::size_t c) {
  // Equal slopes on both sides of every extremum keep it in place under a
  // width-3 moving average.
  constexpr double kSlope = 0.03;
  std::vector<double> v(L + 1);
  v[0] = 0.1;
  for (std::size_t l = 1; l <= L; ++l) {
    const bool rising = l <= a || (l > b && l <= c);
    v[l] = v[l - 1] + (rising ? kSlope : -kSlope);
  }
  return v;
}

}  // namespace fixtures
