#pragma once

// On-disk dump archive: one inference trace as a JSON manifest plus raw
// little-endian float32 tensor files addressed by (path, offset, shape).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmdyn/tensor.hpp"

namespace mmdyn {

enum class NormKind { LayerNorm, RmsNorm };

std::string_view to_string(NormKind kind) noexcept;
NormKind parse_norm_kind(std::string_view text);

/// Half-open token index range [start, end).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end > start ? end - start : 0; }
  bool empty() const noexcept { return end <= start; }
  bool contains(std::size_t i) const noexcept { return i >= start && i < end; }
  bool overlaps(const TokenSpan& other) const noexcept {
    return start < other.end && other.start < end;
  }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct ModalitySpan {
  TokenSpan visual;
  TokenSpan text;
};

struct TensorRef {
  std::string path;  // relative to the manifest directory
  std::vector<std::size_t> shape;
  std::uint64_t offset_bytes = 0;

  std::size_t element_count() const noexcept;
  std::uint64_t byte_size() const noexcept { return 4u * element_count(); }
};

/// Attention block references; absent for the embedding output (layer 0).
struct AttentionRefs {
  TensorRef attn_probs;  // [H, T, T], post-softmax
  TensorRef attn_input;  // [T, d], normed input to the attention block
  TensorRef w_v;         // [d, d], value = x * W_V + b_V
  TensorRef b_v;         // [d]
  TensorRef w_o;         // [d, d], out = z * W_O + b_O
  TensorRef b_o;         // [d]
};

struct LayerRecord {
  TensorRef hidden;  // [T, d]
  std::optional<AttentionRefs> attention;
};

struct UnembeddingHead {
  TensorRef unembedding;  // [V, d]
  TensorRef norm_gamma;   // [d]
  TensorRef norm_beta;    // [d]
  double norm_eps = 1e-5;
  std::string vocab_path;
  std::vector<std::string> vocab;
};

struct DumpManifest {
  std::filesystem::path root;  // directory holding manifest.json
  std::string model_name;
  std::size_t num_layers = 0;
  std::size_t hidden_size = 0;
  std::size_t num_heads = 0;
  std::size_t head_dim = 0;
  std::size_t num_tokens = 0;
  std::string dtype = "f32le";
  NormKind norm_kind = NormKind::LayerNorm;
  std::vector<std::string> tokens;
  ModalitySpan spans;
  std::vector<LayerRecord> layers;  // L + 1 entries, index 0 = embedding output
  UnembeddingHead head;
  std::optional<std::string> caption;
};

/// Parses `path` (a manifest.json, or a directory containing one) and the
/// vocab file it names. Span and scalar checks happen here; tensor-level
/// checks are left to validate_dump.
DumpManifest read_manifest(const std::filesystem::path& path);

/// Serializes `manifest` to `<manifest.root>/manifest.json`.
void write_manifest(const DumpManifest& manifest);

/// Loads exactly prod(shape) float32 values starting at ref.offset_bytes.
/// Throws ShortRead if the file is too small and NonFiniteValue on NaN/Inf.
Tensor load_tensor(const std::filesystem::path& root, const TensorRef& ref);

struct ValidationCheck {
  std::string name;
  bool ok = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const noexcept;
  std::vector<ValidationCheck> failures() const;
  std::string summary(std::size_t max_failures = 8) const;
};

/// Row-sum tolerance for attention probabilities.
inline constexpr double kAttentionRowSumTolerance = 1e-4;

ValidationReport validate_dump(const DumpManifest& manifest);

/// Tensors of one decoder block, loaded.
struct LayerTensors {
  Tensor attn_probs;
  Tensor attn_input;
  Tensor w_v;
  Tensor b_v;
  Tensor w_o;
  Tensor b_o;
};

struct HeadTensors {
  Tensor unembedding;
  Tensor norm_gamma;
  Tensor norm_beta;
  double norm_eps = 1e-5;
  NormKind norm_kind = NormKind::LayerNorm;
  std::vector<std::string> vocab;
};

/// A manifest that passed validate_dump. Tensors are read on demand, so a
/// Dump is cheap to hold and safe to share read-only across threads.
class Dump {
 public:
  /// read_manifest + validate_dump; throws ValidationFailed on any failure.
  static Dump open(const std::filesystem::path& path);

  /// Throws ValidationFailed unless `report.ok()`.
  static Dump from_validated(DumpManifest manifest, const ValidationReport& report);

  const DumpManifest& manifest() const noexcept { return manifest_; }
  std::size_t num_layers() const noexcept { return manifest_.num_layers; }
  std::size_t num_tokens() const noexcept { return manifest_.num_tokens; }
  std::size_t hidden_size() const noexcept { return manifest_.hidden_size; }
  std::size_t num_heads() const noexcept { return manifest_.num_heads; }
  const ModalitySpan& spans() const noexcept { return manifest_.spans; }

  /// Hidden states [T, d] for layer 0..L.
  Tensor hidden(std::size_t layer) const;

  /// Attention-block tensors for decoder block 1..L.
  LayerTensors layer(std::size_t layer) const;

  HeadTensors head() const;

 private:
  explicit Dump(DumpManifest manifest) : manifest_(std::move(manifest)) {}

  DumpManifest manifest_;
};

/// Complete archive contents held in memory; the unit write_dump serializes.
struct DumpData {
  std::string model_name = "unnamed";
  std::size_t num_heads = 1;
  NormKind norm_kind = NormKind::LayerNorm;
  std::vector<std::string> tokens;
  ModalitySpan spans;
  std::vector<Tensor> hidden;        // L + 1 tensors [T, d]
  std::vector<LayerTensors> blocks;  // L entries, blocks[l - 1] is decoder block l
  HeadTensors head;
  std::optional<std::string> caption;
};

/// Writes `data` as manifest.json + layer_NNN.bin + head.bin + vocab.txt into
/// `out_dir` (created if needed). Geometry is taken from the tensors as-is,
/// so malformed data produces an archive that fails validation.
DumpManifest write_dump(const DumpData& data, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Synthetic archives with planted ground truth.

struct SynthSpec {
  std::string model_name = "synthetic";
  std::size_t num_layers = 4;
  std::size_t num_tokens = 16;
  std::size_t hidden_size = 32;
  std::size_t num_heads = 2;
  std::size_t vocab_size = 64;
  /// Defaults: visual = [0, T/2), text = [T/2, T).
  std::optional<TokenSpan> visual;
  std::optional<TokenSpan> text;

  /// Target inter-modal similarity per layer 0..L.
  std::vector<double> inter_curve;
  /// Within-modality cluster tightness in [0, 1): squared cosine between each
  /// token's modality-local direction and the modality centroid.
  double visual_tightness = 0.9;
  double text_tightness = 0.9;

  NormKind norm_kind = NormKind::LayerNorm;
  double norm_eps = 1e-5;

  std::optional<std::string> caption;
  /// Words given dedicated rows in U (must be lowercase alphabetic).
  std::vector<std::string> caption_words;
  /// Per layer 0..L, fraction of caption_words decoded top-1 by visual
  /// tokens (token i carries word i). Empty means no planting.
  std::vector<double> word_coverage;

  /// Tokens receiving `sink_mass[l-1]` of each attention row at block l.
  std::vector<std::size_t> sink_tokens;
  std::vector<double> sink_mass;
};

SynthSpec parse_synth_spec(std::string_view json_text);

/// Builds the planted archive in memory. Throws InfeasibleSpec when the spec
/// cannot be planted (curve outside [-1, 1], too few dimensions, ...).
DumpData synthesize_dump(const SynthSpec& spec, std::uint64_t seed);

/// synthesize_dump + write_dump. Same (spec, seed) gives byte-identical files.
DumpManifest generate_synthetic_dump(const SynthSpec& spec, std::uint64_t seed,
                                     const std::filesystem::path& out_dir);

}  // namespace mmdyn
