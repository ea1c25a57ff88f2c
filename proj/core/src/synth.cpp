// Synthetic archive generator.
//
// Geometry of the planted hidden states (all vectors are zero-mean across the
// d coordinates, so layernorm and rmsnorm reduce to positive rescaling):
//
//   a           shared direction for both modalities
//   e, f_w      visual subspace: centroid e, one direction per caption word
//   g, ...      text subspace: centroid g plus free directions
//
// A visual token is  v = cos(phi) a + sin(phi) c  with unit c in the visual
// subspace, a text token is  w = cos(psi) a + sin(psi) b  with unit b in the
// text subspace. Since the subspaces are mutually orthogonal and orthogonal to
// a, cos(v, w) = cos(phi) cos(psi) exactly, independent of c and b. Each
// layer picks cos(phi) = sqrt|s| and cos(psi) = sign(s) sqrt|s|.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mmdyn/dump_io.hpp"
#include "mmdyn/error.hpp"

namespace mmdyn {
namespace {

using Vec = std::vector<double>;

/// mt19937_64 with hand-rolled transforms: the std distributions are
/// implementation-defined, which would break archive reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

[[noreturn]] void infeasible(const std::string& what) {
  throw Error(ErrorCode::InfeasibleSpec, what);
}

double dot(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

double normalize(Vec& x) {
  const double n = std::sqrt(dot(x, x));
  if (n > 0.0) {
    for (double& v : x) v /= n;
  }
  return n;
}

/// Orthonormal basis of the zero-mean subspace of R^d (d - 1 vectors).
std::vector<Vec> zero_mean_basis(std::size_t d, Rng& rng) {
  std::vector<Vec> basis;
  basis.push_back(Vec(d, 1.0 / std::sqrt(static_cast<double>(d))));
  while (basis.size() < d) {
    Vec v(d);
    for (double& x : v) x = rng.normal();
    // Two Gram-Schmidt passes keep the basis orthogonal to ~1e-16.
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& b : basis) axpy(-dot(v, b), b, v);
    }
    if (normalize(v) > 1e-6) basis.push_back(std::move(v));
  }
  basis.erase(basis.begin());
  return basis;
}

/// Random unit vector in span(dirs); zero vector when dirs is empty.
Vec random_unit_in(const std::vector<const Vec*>& dirs, std::size_t d, Rng& rng) {
  Vec v(d, 0.0);
  for (const Vec* dir : dirs) axpy(rng.normal(), *dir, v);
  normalize(v);
  return v;
}

/// centroid * sqrt(t) + local * sqrt(1 - t), normalized; `local` may be zero.
Vec blend(const Vec& centroid, const Vec& local, double tightness) {
  Vec c(centroid.size(), 0.0);
  axpy(std::sqrt(tightness), centroid, c);
  axpy(std::sqrt(1.0 - tightness), local, c);
  normalize(c);
  return c;
}

Tensor random_tensor(std::vector<std::size_t> shape, double scale, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& x : t.data) x = static_cast<float>(scale * rng.normal());
  return t;
}

bool is_lower_alpha(const std::string& w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

void check_spec(const SynthSpec& s, const ModalitySpan& spans) {
  const std::size_t L = s.num_layers;
  if (L < 1) infeasible("num_layers must be >= 1");
  if (s.num_tokens < 2) infeasible("num_tokens must be >= 2");
  if (s.num_heads < 1 || s.hidden_size % s.num_heads != 0) {
    infeasible(fmt::format("hidden_size {} not divisible by num_heads {}", s.hidden_size, s.num_heads));
  }
  if (spans.visual.empty() || spans.text.empty() || spans.visual.overlaps(spans.text) ||
      spans.visual.end > s.num_tokens || spans.text.end > s.num_tokens) {
    infeasible("spans must be non-empty, disjoint and within [0, num_tokens)");
  }
  if (s.inter_curve.size() != L + 1) {
    infeasible(fmt::format("inter_curve has {} values, need num_layers + 1 = {}", s.inter_curve.size(), L + 1));
  }
  for (std::size_t l = 0; l <= L; ++l) {
    const double v = s.inter_curve[l];
    if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
      infeasible(fmt::format("planted similarity {} at layer {} outside [-1, 1]", v, l));
    }
  }
  for (double t : {s.visual_tightness, s.text_tightness}) {
    if (!(t >= 0.0 && t < 1.0)) infeasible(fmt::format("tightness {} outside [0, 1)", t));
  }
  const std::size_t W = s.caption_words.size();
  if (s.hidden_size < 4 + W) {
    infeasible(fmt::format("hidden_size {} too small for {} caption words (need >= {})", s.hidden_size, W, 4 + W));
  }
  if (s.vocab_size < W + 2) infeasible(fmt::format("vocab_size {} < caption words + 2", s.vocab_size));
  for (std::size_t i = 0; i < W; ++i) {
    if (!is_lower_alpha(s.caption_words[i])) {
      infeasible(fmt::format("caption word '{}' is not lowercase alphabetic", s.caption_words[i]));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (s.caption_words[i] == s.caption_words[j]) infeasible("duplicate caption word " + s.caption_words[i]);
    }
  }
  if (!s.word_coverage.empty()) {
    if (s.word_coverage.size() != L + 1) infeasible("word_coverage needs num_layers + 1 values");
    if (W > spans.visual.size()) infeasible("more caption words than visual tokens");
    for (std::size_t l = 0; l <= L; ++l) {
      const double c = s.word_coverage[l];
      if (!(c >= 0.0 && c <= 1.0)) infeasible(fmt::format("word_coverage {} at layer {} outside [0, 1]", c, l));
      if (c > 0.0) {
        if (s.visual_tightness <= 0.0) infeasible("word planting needs visual_tightness > 0");
        const double margin = std::sqrt(1.0 - std::abs(s.inter_curve[l])) * std::sqrt(1.0 - s.visual_tightness);
        if (margin < 1e-2) {
          infeasible(fmt::format("layer {}: similarity {} leaves no room to plant words", l, s.inter_curve[l]));
        }
      }
    }
  }
  for (std::size_t t : s.sink_tokens) {
    if (t >= s.num_tokens) infeasible(fmt::format("sink token {} >= num_tokens", t));
  }
  if (!s.sink_mass.empty()) {
    if (s.sink_mass.size() != L) infeasible("sink_mass needs num_layers values (blocks 1..L)");
    for (double m : s.sink_mass) {
      if (!(m >= 0.0 && m <= 1.0)) infeasible(fmt::format("sink_mass {} outside [0, 1]", m));
    }
  }
}

std::size_t covered_words(const SynthSpec& s, std::size_t layer) {
  if (s.word_coverage.empty()) return 0;
  const double n = s.word_coverage[layer] * static_cast<double>(s.caption_words.size());
  return std::min(s.caption_words.size(), static_cast<std::size_t>(std::llround(n)));
}

}  // namespace

DumpData synthesize_dump(const SynthSpec& spec, std::uint64_t seed) {
  ModalitySpan spans;
  spans.visual = spec.visual.value_or(TokenSpan{0, spec.num_tokens / 2});
  spans.text = spec.text.value_or(TokenSpan{spec.num_tokens / 2, spec.num_tokens});
  check_spec(spec, spans);

  const std::size_t L = spec.num_layers;
  const std::size_t T = spec.num_tokens;
  const std::size_t d = spec.hidden_size;
  const std::size_t H = spec.num_heads;
  const std::size_t V = spec.vocab_size;
  const std::size_t W = spec.caption_words.size();

  Rng rng(seed);
  const std::vector<Vec> basis = zero_mean_basis(d, rng);

  // Basis allocation: [a][e][f_0..f_{W-1}][visual free...][g][text free...]
  const std::size_t free_dims = (d - 1) - 2 - W;
  const std::size_t visual_free = free_dims / 2;
  const Vec& shared = basis[0];
  const Vec& visual_centroid = basis[1];
  std::vector<const Vec*> visual_free_dirs;
  for (std::size_t k = 0; k < visual_free; ++k) visual_free_dirs.push_back(&basis[2 + W + k]);
  const std::size_t text_begin = 2 + W + visual_free;
  const Vec& text_centroid = basis[text_begin];
  std::vector<const Vec*> text_free_dirs;
  for (std::size_t k = text_begin + 1; k < basis.size(); ++k) text_free_dirs.push_back(&basis[k]);
  std::vector<const Vec*> text_subspace = text_free_dirs;
  text_subspace.insert(text_subspace.begin(), &text_centroid);

  // Token-local directions persist across layers.
  std::vector<Vec> local(T);
  for (std::size_t i = 0; i < T; ++i) {
    local[i] = random_unit_in(spans.visual.contains(i) ? visual_free_dirs : text_free_dirs, d, rng);
  }

  DumpData data;
  data.model_name = spec.model_name;
  data.num_heads = H;
  data.norm_kind = spec.norm_kind;
  data.spans = spans;
  data.caption = spec.caption;
  for (std::size_t i = 0; i < T; ++i) {
    if (spans.visual.contains(i)) {
      data.tokens.push_back(fmt::format("<img_{}>", i - spans.visual.start));
    } else if (spans.text.contains(i)) {
      data.tokens.push_back(fmt::format("▁w{}", i - spans.text.start));
    } else {
      data.tokens.push_back(i == 0 ? "<s>" : "<sys>");
    }
  }

  for (std::size_t l = 0; l <= L; ++l) {
    const double s = spec.inter_curve[l];
    const double cos_visual = std::sqrt(std::abs(s));
    const double cos_text = s < 0.0 ? -cos_visual : cos_visual;
    const double sin_angle = std::sqrt(std::max(0.0, 1.0 - std::abs(s)));
    const std::size_t covered = covered_words(spec, l);

    Tensor hidden({T, d});
    for (std::size_t i = 0; i < T; ++i) {
      Vec v(d, 0.0);
      if (spans.visual.contains(i)) {
        const std::size_t slot = i - spans.visual.start;
        const Vec& dir = slot < covered ? basis[2 + slot] : local[i];
        axpy(cos_visual, shared, v);
        axpy(sin_angle, blend(visual_centroid, dir, spec.visual_tightness), v);
      } else {
        axpy(cos_text, shared, v);
        axpy(sin_angle, blend(text_centroid, local[i], spec.text_tightness), v);
      }
      const double magnitude = std::sqrt(static_cast<double>(d)) * rng.uniform(0.5, 2.0);
      for (std::size_t k = 0; k < d; ++k) hidden.data[i * d + k] = static_cast<float>(magnitude * v[k]);
    }
    data.hidden.push_back(std::move(hidden));
  }

  // Decoder blocks: rms-normalized previous hidden state as attention input,
  // random projections, causal attention with optional planted sink mass.
  for (std::size_t l = 1; l <= L; ++l) {
    LayerTensors block;
    const Tensor& prev = data.hidden[l - 1];
    block.attn_input = Tensor({T, d});
    for (std::size_t i = 0; i < T; ++i) {
      double ms = 0.0;
      for (std::size_t k = 0; k < d; ++k) ms += double(prev.data[i * d + k]) * prev.data[i * d + k];
      const double inv = 1.0 / std::sqrt(ms / static_cast<double>(d));
      for (std::size_t k = 0; k < d; ++k) {
        block.attn_input.data[i * d + k] = static_cast<float>(prev.data[i * d + k] * inv);
      }
    }
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(d));
    block.w_v = random_tensor({d, d}, w_scale, rng);
    block.b_v = random_tensor({d}, 0.02, rng);
    block.w_o = random_tensor({d, d}, w_scale, rng);
    block.b_o = random_tensor({d}, 0.02, rng);

    const double sink_mass = spec.sink_mass.empty() ? 0.0 : spec.sink_mass[l - 1];
    block.attn_probs = Tensor({H, T, T});
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < T; ++i) {
        std::vector<double> weight(i + 1);
        std::size_t sinks = 0;
        double base_total = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          weight[j] = rng.uniform(0.5, 1.5);
          const bool is_sink = std::find(spec.sink_tokens.begin(), spec.sink_tokens.end(), j) !=
                               spec.sink_tokens.end();
          if (is_sink) {
            ++sinks;
            weight[j] = -1.0;
          } else {
            base_total += weight[j];
          }
        }
        double mass = sinks == 0 ? 0.0 : (sinks == i + 1 ? 1.0 : sink_mass);
        float* row = block.attn_probs.data.data() + (h * T + i) * T;
        for (std::size_t j = 0; j <= i; ++j) {
          const double p = weight[j] < 0.0 ? mass / static_cast<double>(sinks)
                                           : (1.0 - mass) * weight[j] / base_total;
          row[j] = static_cast<float>(p);
        }
      }
    }
    data.blocks.push_back(std::move(block));
  }

  // Unembedding head. Caption words take the last W ids; their rows point at
  // f_w and away from the visual centroid so that a visual token carrying f_w
  // scores +lambda*sin(phi)*sin(rho)/2 on its word and the negative of that on
  // every other caption word. Filler rows live in the text subspace, which is
  // orthogonal to every visual state, so they score ~0 on visual tokens.
  const double lambda = 4.0;
  const double tan_rho = spec.visual_tightness > 0.0
                             ? std::sqrt(1.0 - spec.visual_tightness) / std::sqrt(spec.visual_tightness)
                             : 0.0;
  const double mu = 0.5 * tan_rho;
  HeadTensors& head = data.head;
  head.unembedding = Tensor({V, d});
  head.vocab.resize(V);
  for (std::size_t r = 0; r < V; ++r) {
    Vec row(d, 0.0);
    if (r + W >= V) {
      const std::size_t w = r + W - V;
      axpy(lambda, basis[2 + w], row);
      axpy(-lambda * mu, visual_centroid, row);
      head.vocab[r] = "▁" + spec.caption_words[w];
    } else {
      row = random_unit_in(text_subspace, d, rng);
      for (double& x : row) x *= lambda;
      head.vocab[r] = fmt::format("▁tok{}", r);
    }
    for (std::size_t k = 0; k < d; ++k) head.unembedding.data[r * d + k] = static_cast<float>(row[k]);
  }
  head.norm_gamma = Tensor({d});
  std::fill(head.norm_gamma.data.begin(), head.norm_gamma.data.end(), 1.0f);
  head.norm_beta = Tensor({d});
  head.norm_eps = spec.norm_eps;
  head.norm_kind = spec.norm_kind;
  return data;
}

DumpManifest generate_synthetic_dump(const SynthSpec& spec, std::uint64_t seed,
                                     const std::filesystem::path& out_dir) {
  return write_dump(synthesize_dump(spec, seed), out_dir);
}

SynthSpec parse_synth_spec(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("synth spec: {}", e.what()));
  }
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "synth spec: expected object");

  SynthSpec s;
  try {
    s.model_name = doc.value("model_name", s.model_name);
    s.num_layers = doc.at("num_layers").get<std::size_t>();
    s.num_tokens = doc.at("num_tokens").get<std::size_t>();
    s.hidden_size = doc.at("hidden_size").get<std::size_t>();
    s.num_heads = doc.value("num_heads", s.num_heads);
    s.vocab_size = doc.value("vocab_size", s.vocab_size);
    if (doc.contains("spans")) {
      const json& sp = doc["spans"];
      s.visual = TokenSpan{sp.at("visual").at(0).get<std::size_t>(), sp.at("visual").at(1).get<std::size_t>()};
      s.text = TokenSpan{sp.at("text").at(0).get<std::size_t>(), sp.at("text").at(1).get<std::size_t>()};
    }
    s.inter_curve = doc.at("inter_curve").get<std::vector<double>>();
    s.visual_tightness = doc.value("visual_tightness", s.visual_tightness);
    s.text_tightness = doc.value("text_tightness", s.text_tightness);
    if (doc.contains("norm_kind")) s.norm_kind = parse_norm_kind(doc["norm_kind"].get<std::string>());
    s.norm_eps = doc.value("norm_eps", s.norm_eps);
    if (doc.contains("caption") && !doc["caption"].is_null()) s.caption = doc["caption"].get<std::string>();
    s.caption_words = doc.value("caption_words", s.caption_words);
    s.word_coverage = doc.value("word_coverage", s.word_coverage);
    s.sink_tokens = doc.value("sink_tokens", s.sink_tokens);
    s.sink_mass = doc.value("sink_mass", s.sink_mass);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("synth spec: {}", e.what()));
  }
  return s;
}

}  // namespace mmdyn
