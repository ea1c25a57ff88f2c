#pragma once

// LogitLens over visual tokens: final norm + unembedding at every layer, and
// recall of the decoded words against a reference caption.

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmdyn/dump_io.hpp"

namespace mmdyn {

inline constexpr std::size_t kDefaultTopK = 5;

/// layernorm: gamma * (h - mean) / sqrt(var + eps) + beta
/// rmsnorm:   gamma * h / sqrt(mean(h^2) + eps)
std::vector<double> apply_final_norm(std::span<const float> h, const HeadTensors& head);

struct TokenDecode {
  std::size_t id = 0;
  double logit = 0.0;
  friend bool operator==(const TokenDecode&, const TokenDecode&) = default;
};

/// Top-k of U * apply_final_norm(h), logit-descending, ties to the lower id.
std::vector<TokenDecode> decode_hidden(std::span<const float> h, const HeadTensors& head, std::size_t k);

struct DecodedLayer {
  std::size_t layer = 0;
  std::vector<std::size_t> token_indices;          // visual token positions
  std::vector<std::vector<TokenDecode>> per_token;  // k decodes per visual token
};

/// decode_hidden for every visual token at every layer 0..L.
std::vector<DecodedLayer> verbalize_visual_tokens(const Dump& dump, std::size_t k, unsigned threads = 1);

class Stoplist {
 public:
  /// English function words shipped in data/stoplist_en.txt.
  static const Stoplist& builtin();
  /// One word per line; blank lines and lines starting with '#' are skipped.
  static Stoplist from_file(const std::filesystem::path& path);
  static Stoplist from_text(std::string_view text, std::string name);
  static Stoplist from_words(std::initializer_list<std::string_view> words, std::string id);

  bool contains(std::string_view word) const { return words_.count(std::string(word)) != 0; }
  /// "<name>:<sha256 prefix of the file contents>".
  const std::string& id() const noexcept { return id_; }
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::string id_;
  std::set<std::string, std::less<>> words_;
};

/// Strips leading "▁"/"Ġ" markers and surrounding whitespace, lowercases, and
/// drops empty, non-alphabetic, or stoplisted results.
std::optional<std::string> normalize_word(std::string_view token, const Stoplist& stoplist = Stoplist::builtin());

/// Content words of a caption: split on non-letters, then normalize_word.
std::set<std::string> caption_content_words(std::string_view caption, const Stoplist& stoplist);

/// |G intersect D| / |G|, G = caption content words, D = normalized top-k
/// decodes over all visual tokens. Throws EmptyCaption if G is empty.
double caption_recall(const DecodedLayer& decoded, const std::vector<std::string>& vocab,
                      std::string_view caption, const Stoplist& stoplist);

struct RecallCurve {
  std::vector<double> values;  // indexed by layer 0..L
  std::size_t k = kDefaultTopK;
  std::string stoplist_id;
  std::size_t sample_count = 1;
};

/// caption_recall per layer. Throws MissingCaption if the dump has none.
RecallCurve recall_curve(const Dump& dump, std::size_t k, const Stoplist& stoplist, unsigned threads = 1);

/// Per-layer mean in input order; all curves must share k, stoplist and length.
RecallCurve aggregate_recall(std::span<const RecallCurve> curves);

/// One JSON object per (layer, visual token): {layer, token_index, decodes[]}.
std::string decoded_to_jsonl(const std::vector<DecodedLayer>& layers, const std::vector<std::string>& vocab);

/// `layer,recall` with a header row.
std::string recall_to_csv(const RecallCurve& curve);

}  // namespace mmdyn
