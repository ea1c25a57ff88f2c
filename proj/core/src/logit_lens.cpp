#include "mmdyn/logit_lens.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mmdyn/error.hpp"
#include "mmdyn/hash.hpp"
#include "mmdyn/parallel.hpp"
#include "stoplist_data.hpp"

namespace mmdyn {

std::vector<double> apply_final_norm(std::span<const float> h, const HeadTensors& head) {
  const std::size_t d = h.size();
  if (head.norm_gamma.size() != d || head.norm_beta.size() != d) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("norm parameters do not match hidden size {}", d));
  }
  const double n = static_cast<double>(d);
  std::vector<double> out(d);
  if (head.norm_kind == NormKind::LayerNorm) {
    double mean = 0.0;
    for (float x : h) mean += x;
    mean /= n;
    double var = 0.0;
    for (float x : h) var += (x - mean) * (x - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + head.norm_eps);
    for (std::size_t k = 0; k < d; ++k) {
      out[k] = head.norm_gamma.data[k] * ((h[k] - mean) * inv) + head.norm_beta.data[k];
    }
  } else {
    double ms = 0.0;
    for (float x : h) ms += double(x) * x;
    const double inv = 1.0 / std::sqrt(ms / n + head.norm_eps);
    for (std::size_t k = 0; k < d; ++k) out[k] = head.norm_gamma.data[k] * (h[k] * inv);
  }
  return out;
}

namespace {

bool decode_before(const TokenDecode& a, const TokenDecode& b) {
  return a.logit > b.logit || (a.logit == b.logit && a.id < b.id);
}

double row_dot(const float* row, const std::vector<double>& x) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = x.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += row[k] * x[k];
    s1 += row[k + 1] * x[k + 1];
    s2 += row[k + 2] * x[k + 2];
    s3 += row[k + 3] * x[k + 3];
  }
  for (; k < n; ++k) s0 += row[k] * x[k];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

std::vector<TokenDecode> decode_hidden(std::span<const float> h, const HeadTensors& head, std::size_t k) {
  const MatrixView U = head.unembedding.matrix();
  const std::size_t V = U.rows();
  if (k < 1 || k > V) throw Error(ErrorCode::BadK, fmt::format("k={} outside [1, {}]", k, V));
  if (U.cols() != h.size()) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("U has {} columns, hidden has {}", U.cols(), h.size()));
  }
  const std::vector<double> normed = apply_final_norm(h, head);
  std::vector<TokenDecode> all(V);
  for (std::size_t r = 0; r < V; ++r) all[r] = {r, row_dot(U.row(r).data(), normed)};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), decode_before);
  all.resize(k);
  return all;
}

std::vector<DecodedLayer> verbalize_visual_tokens(const Dump& dump, std::size_t k, unsigned threads) {
  const HeadTensors head = dump.head();
  const std::size_t V = head.unembedding.shape.empty() ? 0 : head.unembedding.shape[0];
  if (k < 1 || k > V) throw Error(ErrorCode::BadK, fmt::format("k={} outside [1, {}]", k, V));
  const TokenSpan visual = dump.spans().visual;
  std::vector<DecodedLayer> layers(dump.num_layers() + 1);
  parallel_for(layers.size(), threads, [&](std::size_t l) {
    try {
      const Tensor hidden = dump.hidden(l);
      const MatrixView h = hidden.matrix();
      DecodedLayer& out = layers[l];
      out.layer = l;
      for (std::size_t i = visual.start; i < visual.end; ++i) {
        out.token_indices.push_back(i);
        out.per_token.push_back(decode_hidden(h.row(i), head, k));
      }
    } catch (const Error& e) {
      throw e.annotate(fmt::format("layer {}", l));
    }
  });
  return layers;
}

const Stoplist& Stoplist::builtin() {
  static const Stoplist list = from_text(detail::kBuiltinStoplist, "stoplist_en");
  return list;
}

Stoplist Stoplist::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("stoplist '{}' not readable", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str(), path.stem().string());
}

Stoplist Stoplist::from_text(std::string_view text, std::string name) {
  Stoplist list;
  list.id_ = name + ":" + sha256_hex(text).substr(0, 12);
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string word = line.substr(first, last - first + 1);
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
    list.words_.insert(std::move(word));
  }
  return list;
}

Stoplist Stoplist::from_words(std::initializer_list<std::string_view> words, std::string id) {
  Stoplist list;
  list.id_ = std::move(id);
  for (auto w : words) list.words_.emplace(w);
  return list;
}

std::optional<std::string> normalize_word(std::string_view token, const Stoplist& stoplist) {
  static constexpr std::string_view kSentencePiece = "\xE2\x96\x81";  // U+2581
  static constexpr std::string_view kByteLevel = "\xC4\xA0";          // U+0120
  static constexpr std::string_view kSpace = " \t\r\n";
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (std::string_view marker : {kSentencePiece, kByteLevel}) {
      if (token.substr(0, marker.size()) == marker) {
        token.remove_prefix(marker.size());
        stripped = true;
      }
    }
    const auto lead = token.find_first_not_of(kSpace);
    if (lead == std::string_view::npos) return std::nullopt;
    if (lead > 0) {
      token.remove_prefix(lead);
      stripped = true;
    }
  }
  token = token.substr(0, token.find_last_not_of(kSpace) + 1);

  std::string word;
  word.reserve(token.size());
  for (char c : token) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c < 'a' || c > 'z') return std::nullopt;
    word += c;
  }
  if (word.empty() || stoplist.contains(word)) return std::nullopt;
  return word;
}

std::set<std::string> caption_content_words(std::string_view caption, const Stoplist& stoplist) {
  std::set<std::string> words;
  std::string current;
  auto flush = [&] {
    if (auto w = normalize_word(current, stoplist)) words.insert(std::move(*w));
    current.clear();
  };
  for (char c : caption) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      current += c;
    } else {
      flush();
    }
  }
  flush();
  return words;
}

double caption_recall(const DecodedLayer& decoded, const std::vector<std::string>& vocab,
                      std::string_view caption, const Stoplist& stoplist) {
  const std::set<std::string> truth = caption_content_words(caption, stoplist);
  if (truth.empty()) {
    throw Error(ErrorCode::EmptyCaption, fmt::format("caption '{}' has no content words", caption));
  }
  std::set<std::string> found;
  for (const auto& decodes : decoded.per_token) {
    for (const TokenDecode& td : decodes) {
      if (td.id >= vocab.size()) continue;
      if (auto w = normalize_word(vocab[td.id], stoplist); w && truth.count(*w)) found.insert(*w);
    }
  }
  return static_cast<double>(found.size()) / static_cast<double>(truth.size());
}

RecallCurve recall_curve(const Dump& dump, std::size_t k, const Stoplist& stoplist, unsigned threads) {
  const auto& caption = dump.manifest().caption;
  if (!caption) {
    throw Error(ErrorCode::MissingCaption, fmt::format("'{}' has no caption", dump.manifest().root.string()));
  }
  if (caption_content_words(*caption, stoplist).empty()) {
    throw Error(ErrorCode::EmptyCaption, fmt::format("caption '{}' has no content words", *caption));
  }
  const auto decoded = verbalize_visual_tokens(dump, k, threads);
  RecallCurve curve;
  curve.k = k;
  curve.stoplist_id = stoplist.id();
  for (const DecodedLayer& layer : decoded) {
    curve.values.push_back(caption_recall(layer, dump.manifest().head.vocab, *caption, stoplist));
  }
  return curve;
}

RecallCurve aggregate_recall(std::span<const RecallCurve> curves) {
  if (curves.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate_recall: no curves");
  const RecallCurve& first = curves.front();
  RecallCurve out;
  out.k = first.k;
  out.stoplist_id = first.stoplist_id;
  out.sample_count = 0;
  out.values.assign(first.values.size(), 0.0);
  for (const auto& c : curves) {
    if (c.values.size() != first.values.size()) {
      throw Error(ErrorCode::LengthMismatch,
                  fmt::format("recall curve lengths {} and {}", first.values.size(), c.values.size()));
    }
    if (c.k != first.k || c.stoplist_id != first.stoplist_id) {
      throw Error(ErrorCode::InvalidArgument, "recall curves use different k or stoplist");
    }
    out.sample_count += c.sample_count;
    for (std::size_t l = 0; l < c.values.size(); ++l) out.values[l] += c.values[l];
  }
  for (double& v : out.values) v /= static_cast<double>(curves.size());
  return out;
}

std::string decoded_to_jsonl(const std::vector<DecodedLayer>& layers, const std::vector<std::string>& vocab) {
  std::string out;
  for (const DecodedLayer& layer : layers) {
    for (std::size_t t = 0; t < layer.per_token.size(); ++t) {
      nlohmann::ordered_json line;
      line["layer"] = layer.layer;
      line["token_index"] = layer.token_indices[t];
      line["decodes"] = nlohmann::ordered_json::array();
      for (const TokenDecode& td : layer.per_token[t]) {
        nlohmann::ordered_json item;
        item["id"] = td.id;
        item["word"] = td.id < vocab.size() ? vocab[td.id] : std::string();
        item["logit"] = td.logit;
        line["decodes"].push_back(std::move(item));
      }
      out += line.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
      out += '\n';
    }
  }
  return out;
}

std::string recall_to_csv(const RecallCurve& curve) {
  std::string out = "layer,recall\n";
  for (std::size_t l = 0; l < curve.values.size(); ++l) out += fmt::format("{},{}\n", l, curve.values[l]);
  return out;
}

}  // namespace mmdyn
