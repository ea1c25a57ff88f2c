#include "mmdyn/dump_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "mmdyn/error.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace mmdyn {

std::string_view to_string(NormKind kind) noexcept {
  return kind == NormKind::LayerNorm ? "layernorm" : "rmsnorm";
}

NormKind parse_norm_kind(std::string_view text) {
  if (text == "layernorm") return NormKind::LayerNorm;
  if (text == "rmsnorm") return NormKind::RmsNorm;
  throw Error(ErrorCode::SchemaViolation, fmt::format("norm_kind: unknown value '{}'", text));
}

std::size_t TensorRef::element_count() const noexcept {
  return mmdyn::element_count(shape);
}

namespace {

[[noreturn]] void schema_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, key + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  const std::string full = where.empty() ? key : where + "." + key;
  if (!obj.is_object()) schema_error(where.empty() ? "<root>" : where, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(full, "missing key");
  return *it;
}

std::size_t require_count(const json& obj, const std::string& key, const std::string& where = "") {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    schema_error(where.empty() ? key : where + "." + key, "expected non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string require_string(const json& obj, const std::string& key, const std::string& where = "") {
  const json& v = require(obj, key, where);
  if (!v.is_string()) schema_error(where.empty() ? key : where + "." + key, "expected string");
  return v.get<std::string>();
}

TensorRef parse_ref(const json& obj, const std::string& where) {
  TensorRef ref;
  ref.path = require_string(obj, "path", where);
  const json& shape = require(obj, "shape", where);
  if (!shape.is_array() || shape.empty()) schema_error(where + ".shape", "expected non-empty array");
  for (const json& dim : shape) {
    if (!dim.is_number_integer() || dim.get<std::int64_t>() < 0) {
      schema_error(where + ".shape", "expected non-negative integers");
    }
    ref.shape.push_back(dim.get<std::size_t>());
  }
  ref.offset_bytes = obj.contains("offset_bytes") ? require_count(obj, "offset_bytes", where) : 0;
  return ref;
}

TokenSpan parse_span(const json& spans, const std::string& key) {
  const json& v = require(spans, key, "spans");
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
      v[0].get<std::int64_t>() < 0 || v[1].get<std::int64_t>() < 0) {
    schema_error("spans", fmt::format("{} must be [start, end)", key));
  }
  return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
}

ordered_json ref_json(const TensorRef& ref) {
  ordered_json j;
  j["path"] = ref.path;
  j["shape"] = ref.shape;
  j["offset_bytes"] = ref.offset_bytes;
  return j;
}

std::vector<std::string> read_vocab(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("vocab file '{}' not readable", file.string()));
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return vocab;
}

float decode_le(const unsigned char* p) {
  std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                       (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  return std::bit_cast<float>(bits);
}

/// Raw read without the finiteness check.
std::vector<float> read_floats(const fs::path& root, const TensorRef& ref) {
  const fs::path file = root / ref.path;
  std::error_code ec;
  const auto file_size = fs::file_size(file, ec);
  if (ec) throw Error(ErrorCode::MissingFile, fmt::format("tensor file '{}' not found", ref.path));
  const std::uint64_t need = ref.offset_bytes + ref.byte_size();
  if (file_size < need) {
    throw Error(ErrorCode::ShortRead,
                fmt::format("'{}' has {} bytes, need {} (offset {} + {} floats)", ref.path,
                            file_size, need, ref.offset_bytes, ref.element_count()));
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("tensor file '{}' not readable", ref.path));
  in.seekg(static_cast<std::streamoff>(ref.offset_bytes));
  std::vector<float> out(ref.element_count());
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(ref.byte_size()));
  } else {
    std::vector<unsigned char> raw(ref.byte_size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = decode_le(raw.data() + 4 * i);
  }
  if (!in) throw Error(ErrorCode::ShortRead, fmt::format("read failed on '{}'", ref.path));
  return out;
}

std::optional<std::size_t> first_non_finite(std::span<const float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) return i;
  }
  return std::nullopt;
}

}  // namespace

DumpManifest read_manifest(const fs::path& path) {
  fs::path file = path;
  if (fs::is_directory(file)) file /= "manifest.json";
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("manifest '{}' not readable", file.string()));

  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("manifest.json: {}", e.what()));
  }
  if (!doc.is_object()) schema_error("<root>", "expected object");

  DumpManifest m;
  m.root = file.parent_path();
  m.dtype = require_string(doc, "dtype");
  if (m.dtype != "f32le") {
    throw Error(ErrorCode::UnsupportedDtype, fmt::format("dtype '{}' (only f32le is supported)", m.dtype));
  }
  m.model_name = require_string(doc, "model_name");
  m.num_layers = require_count(doc, "num_layers");
  m.hidden_size = require_count(doc, "hidden_size");
  m.num_heads = require_count(doc, "num_heads");
  m.head_dim = require_count(doc, "head_dim");
  m.num_tokens = require_count(doc, "num_tokens");
  m.norm_kind = parse_norm_kind(require_string(doc, "norm_kind"));

  const json& tokens = require(doc, "tokens", "");
  if (!tokens.is_array()) schema_error("tokens", "expected array");
  for (const json& t : tokens) {
    if (!t.is_string()) schema_error("tokens", "expected strings");
    m.tokens.push_back(t.get<std::string>());
  }

  const json& spans = require(doc, "spans", "");
  m.spans.visual = parse_span(spans, "visual");
  m.spans.text = parse_span(spans, "text");
  if (m.spans.visual.empty() || m.spans.text.empty()) schema_error("spans", "ranges must be non-empty");
  if (m.spans.visual.overlaps(m.spans.text)) schema_error("spans", "visual and text ranges overlap");
  if (m.spans.visual.end > m.num_tokens || m.spans.text.end > m.num_tokens) {
    schema_error("spans", fmt::format("ranges exceed num_tokens={}", m.num_tokens));
  }

  const json& layers = require(doc, "layers", "");
  if (!layers.is_array()) schema_error("layers", "expected array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = fmt::format("layers[{}]", i);
    const json& item = layers[i];
    LayerRecord rec;
    rec.hidden = parse_ref(require(item, "hidden", where), where + ".hidden");
    static constexpr const char* kAttnKeys[] = {"attn_probs", "attn_input", "W_V", "b_V", "W_O", "b_O"};
    std::size_t present = 0;
    for (const char* key : kAttnKeys) present += item.contains(key) && !item[key].is_null();
    if (present == std::size(kAttnKeys)) {
      AttentionRefs a;
      a.attn_probs = parse_ref(item["attn_probs"], where + ".attn_probs");
      a.attn_input = parse_ref(item["attn_input"], where + ".attn_input");
      a.w_v = parse_ref(item["W_V"], where + ".W_V");
      a.b_v = parse_ref(item["b_V"], where + ".b_V");
      a.w_o = parse_ref(item["W_O"], where + ".W_O");
      a.b_o = parse_ref(item["b_O"], where + ".b_O");
      rec.attention = std::move(a);
    } else if (present != 0) {
      for (const char* key : kAttnKeys) {
        if (!item.contains(key) || item[key].is_null()) schema_error(where + "." + key, "missing key");
      }
    }
    m.layers.push_back(std::move(rec));
  }

  const json& head = require(doc, "head", "");
  m.head.unembedding = parse_ref(require(head, "U", "head"), "head.U");
  m.head.norm_gamma = parse_ref(require(head, "norm_gamma", "head"), "head.norm_gamma");
  m.head.norm_beta = parse_ref(require(head, "norm_beta", "head"), "head.norm_beta");
  const json& eps = require(head, "norm_eps", "head");
  if (!eps.is_number() || !std::isfinite(eps.get<double>()) || eps.get<double>() < 0.0) {
    schema_error("head.norm_eps", "expected finite non-negative number");
  }
  m.head.norm_eps = eps.get<double>();
  m.head.vocab_path = require_string(head, "vocab_path", "head");
  m.head.vocab = read_vocab(m.root / m.head.vocab_path);

  if (auto it = doc.find("caption"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) schema_error("caption", "expected string or null");
    m.caption = it->get<std::string>();
  }
  return m;
}

void write_manifest(const DumpManifest& m) {
  ordered_json doc;
  doc["model_name"] = m.model_name;
  doc["num_layers"] = m.num_layers;
  doc["hidden_size"] = m.hidden_size;
  doc["num_heads"] = m.num_heads;
  doc["head_dim"] = m.head_dim;
  doc["num_tokens"] = m.num_tokens;
  doc["dtype"] = m.dtype;
  doc["norm_kind"] = std::string(to_string(m.norm_kind));
  doc["tokens"] = m.tokens;
  doc["spans"]["visual"] = {m.spans.visual.start, m.spans.visual.end};
  doc["spans"]["text"] = {m.spans.text.start, m.spans.text.end};
  doc["layers"] = ordered_json::array();
  for (const LayerRecord& rec : m.layers) {
    ordered_json item;
    item["hidden"] = ref_json(rec.hidden);
    if (rec.attention) {
      item["attn_probs"] = ref_json(rec.attention->attn_probs);
      item["attn_input"] = ref_json(rec.attention->attn_input);
      item["W_V"] = ref_json(rec.attention->w_v);
      item["b_V"] = ref_json(rec.attention->b_v);
      item["W_O"] = ref_json(rec.attention->w_o);
      item["b_O"] = ref_json(rec.attention->b_o);
    }
    doc["layers"].push_back(std::move(item));
  }
  doc["head"]["U"] = ref_json(m.head.unembedding);
  doc["head"]["norm_gamma"] = ref_json(m.head.norm_gamma);
  doc["head"]["norm_beta"] = ref_json(m.head.norm_beta);
  doc["head"]["norm_eps"] = m.head.norm_eps;
  doc["head"]["vocab_path"] = m.head.vocab_path;
  doc["caption"] = m.caption ? ordered_json(*m.caption) : ordered_json(nullptr);

  std::ofstream out(m.root / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", (m.root / "manifest.json").string()));
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "manifest write failed");
}

Tensor load_tensor(const fs::path& root, const TensorRef& ref) {
  Tensor t(ref.shape, read_floats(root, ref));
  if (auto bad = first_non_finite(t.data)) {
    throw Error(ErrorCode::NonFiniteValue,
                fmt::format("'{}' element {} is {}", ref.path, *bad, t.data[*bad]));
  }
  return t;
}

bool ValidationReport::ok() const noexcept {
  for (const auto& c : checks) {
    if (!c.ok) return false;
  }
  return true;
}

std::vector<ValidationCheck> ValidationReport::failures() const {
  std::vector<ValidationCheck> out;
  for (const auto& c : checks) {
    if (!c.ok) out.push_back(c);
  }
  return out;
}

std::string ValidationReport::summary(std::size_t max_failures) const {
  const auto bad = failures();
  std::string out = fmt::format("{} checks, {} failed", checks.size(), bad.size());
  for (std::size_t i = 0; i < bad.size() && i < max_failures; ++i) {
    out += fmt::format("; {}{}{}", bad[i].name, bad[i].detail.empty() ? "" : ": ", bad[i].detail);
  }
  return out;
}

namespace {

class Validator {
 public:
  explicit Validator(const DumpManifest& m) : m_(m) {}

  ValidationReport run() {
    check_geometry();
    if (!geometry_ok_) return std::move(report_);

    const std::size_t T = m_.num_tokens;
    const std::size_t d = m_.hidden_size;
    const std::size_t H = m_.num_heads;

    for (std::size_t l = 0; l < m_.layers.size(); ++l) {
      const LayerRecord& rec = m_.layers[l];
      const std::string tag = fmt::format("layer {}", l);
      check_finite(tensor("hidden " + tag, rec.hidden, {T, d}), "hidden " + tag);
      if (l == 0 || !rec.attention) continue;
      const AttentionRefs& a = *rec.attention;
      auto probs = tensor("attn_probs " + tag, a.attn_probs, {H, T, T});
      if (check_finite(probs, "attn_probs " + tag)) check_attention(*probs, l);
      check_finite(tensor("attn_input " + tag, a.attn_input, {T, d}), "attn_input " + tag);
      check_finite(tensor("W_V " + tag, a.w_v, {d, d}), "W_V " + tag);
      check_finite(tensor("b_V " + tag, a.b_v, {d}), "b_V " + tag);
      check_finite(tensor("W_O " + tag, a.w_o, {d, d}), "W_O " + tag);
      check_finite(tensor("b_O " + tag, a.b_o, {d}), "b_O " + tag);
    }

    const std::size_t V = m_.head.vocab.size();
    add("vocab", V >= 2, V >= 2 ? "" : fmt::format("vocab has {} entries, need >= 2", V));
    const auto& U = m_.head.unembedding;
    if (!U.shape.empty() && U.shape[0] != V) {
      add("vocab", false, fmt::format("vocab length {} != U rows {}", V, U.shape[0]));
    }
    check_finite(tensor("head.U", U, {V, d}), "head.U");
    check_finite(tensor("head.norm_gamma", m_.head.norm_gamma, {d}), "head.norm_gamma");
    check_finite(tensor("head.norm_beta", m_.head.norm_beta, {d}), "head.norm_beta");

    if (finite_failures_ == 0) add("finiteness", true, "");
    return std::move(report_);
  }

 private:
  static constexpr std::size_t kMaxRowFailures = 16;

  void add(std::string name, bool ok, std::string detail) {
    report_.checks.push_back({std::move(name), ok, std::move(detail)});
  }

  void check_geometry() {
    const auto& m = m_;
    std::vector<std::string> problems;
    if (m.num_layers < 1) problems.push_back("num_layers must be >= 1");
    if (m.num_tokens < 2) problems.push_back("num_tokens must be >= 2");
    if (m.num_heads < 1) problems.push_back("num_heads must be >= 1");
    if (m.hidden_size != m.num_heads * m.head_dim) {
      problems.push_back(fmt::format("hidden_size {} != num_heads {} * head_dim {}", m.hidden_size,
                                     m.num_heads, m.head_dim));
    }
    add("geometry", problems.empty(), fmt::format("{}", fmt::join(problems, "; ")));
    geometry_ok_ = problems.empty();

    const bool spans_ok = !m.spans.visual.empty() && !m.spans.text.empty() &&
                          !m.spans.visual.overlaps(m.spans.text) &&
                          m.spans.visual.end <= m.num_tokens && m.spans.text.end <= m.num_tokens;
    add("spans", spans_ok, spans_ok ? "" : "spans empty, overlapping or out of range");

    add("tokens", m.tokens.size() == m.num_tokens,
        m.tokens.size() == m.num_tokens
            ? ""
            : fmt::format("{} token strings for num_tokens={}", m.tokens.size(), m.num_tokens));

    const bool count_ok = m.layers.size() == m.num_layers + 1;
    add("hidden_count", count_ok,
        count_ok ? "" : fmt::format("{} layer entries, expected {}", m.layers.size(), m.num_layers + 1));

    std::vector<std::size_t> missing;
    for (std::size_t l = 1; l < m.layers.size(); ++l) {
      if (!m.layers[l].attention) missing.push_back(l);
    }
    add("attention_refs", missing.empty(),
        missing.empty() ? "" : fmt::format("no attention refs for layers {}", fmt::join(missing, ",")));
    geometry_ok_ = geometry_ok_ && spans_ok && count_ok && missing.empty();
  }

  std::optional<Tensor> tensor(const std::string& name, const TensorRef& ref,
                               std::vector<std::size_t> expected) {
    if (ref.shape != expected) {
      add("shape " + name, false,
          fmt::format("shape [{}] != expected [{}]", fmt::join(ref.shape, ","), fmt::join(expected, ",")));
      return std::nullopt;
    }
    try {
      Tensor t(ref.shape, read_floats(m_.root, ref));
      add("shape " + name, true, "");
      return t;
    } catch (const Error& e) {
      add("file " + name, false, e.what());
      return std::nullopt;
    }
  }

  bool check_finite(const std::optional<Tensor>& t, const std::string& name) {
    if (!t) return false;
    if (auto bad = first_non_finite(t->data)) {
      ++finite_failures_;
      add("finiteness", false, fmt::format("{} element {} is {}", name, *bad, t->data[*bad]));
      return false;
    }
    return true;
  }

  void check_attention(const Tensor& probs, std::size_t layer) {
    const std::size_t H = probs.shape[0];
    const std::size_t T = probs.shape[1];
    std::size_t causal_bad = 0;
    std::size_t sum_bad = 0;
    for (std::size_t h = 0; h < H; ++h) {
      const MatrixView alpha = probs.slice(h);
      for (std::size_t i = 0; i < T; ++i) {
        const auto row = alpha.row(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < T; ++j) sum += row[j];
        for (std::size_t j = i + 1; j < T; ++j) {
          if (row[j] != 0.0f) {
            if (causal_bad++ < kMaxRowFailures) {
              add(fmt::format("attn_probs causal layer {} head {} row {}", layer, h, i), false,
                  fmt::format("entry at column {} is {}", j, row[j]));
            }
            break;
          }
        }
        bool negative = false;
        for (std::size_t j = 0; j <= i; ++j) negative = negative || row[j] < 0.0f;
        if (std::abs(sum - 1.0) > kAttentionRowSumTolerance || negative) {
          if (sum_bad++ < kMaxRowFailures) {
            add(fmt::format("attn_probs row-sum layer {} head {} row {}", layer, h, i), false,
                negative ? "negative probability" : fmt::format("row sums to {:.6f}", sum));
          }
        }
      }
    }
    if (causal_bad == 0) add(fmt::format("attn_probs causal layer {}", layer), true, "");
    if (sum_bad == 0) add(fmt::format("attn_probs row-sum layer {}", layer), true, "");
    if (causal_bad > kMaxRowFailures || sum_bad > kMaxRowFailures) {
      add(fmt::format("attn_probs layer {}", layer), false,
          fmt::format("{} causal and {} row-sum failures in total", causal_bad, sum_bad));
    }
  }

  const DumpManifest& m_;
  ValidationReport report_;
  bool geometry_ok_ = true;
  std::size_t finite_failures_ = 0;
};

}  // namespace

ValidationReport validate_dump(const DumpManifest& manifest) {
  return Validator(manifest).run();
}

Dump Dump::open(const fs::path& path) {
  DumpManifest manifest = read_manifest(path);
  const ValidationReport report = validate_dump(manifest);
  return from_validated(std::move(manifest), report);
}

Dump Dump::from_validated(DumpManifest manifest, const ValidationReport& report) {
  if (!report.ok()) {
    throw Error(ErrorCode::ValidationFailed,
                fmt::format("'{}': {}", manifest.root.string(), report.summary()));
  }
  return Dump(std::move(manifest));
}

Tensor Dump::hidden(std::size_t layer) const {
  if (layer >= manifest_.layers.size()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("layer {} out of range", layer));
  }
  return load_tensor(manifest_.root, manifest_.layers[layer].hidden);
}

LayerTensors Dump::layer(std::size_t layer) const {
  if (layer == 0 || layer >= manifest_.layers.size()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("decoder block {} out of range 1..{}", layer,
                                                        manifest_.num_layers));
  }
  const AttentionRefs& a = *manifest_.layers[layer].attention;
  const fs::path& root = manifest_.root;
  return {load_tensor(root, a.attn_probs), load_tensor(root, a.attn_input),
          load_tensor(root, a.w_v),        load_tensor(root, a.b_v),
          load_tensor(root, a.w_o),        load_tensor(root, a.b_o)};
}

HeadTensors Dump::head() const {
  const fs::path& root = manifest_.root;
  return {load_tensor(root, manifest_.head.unembedding), load_tensor(root, manifest_.head.norm_gamma),
          load_tensor(root, manifest_.head.norm_beta), manifest_.head.norm_eps, manifest_.norm_kind,
          manifest_.head.vocab};
}

namespace {

class BinWriter {
 public:
  BinWriter(const fs::path& root, std::string name) : name_(std::move(name)) {
    out_.open(root / name_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorCode::Io, fmt::format("cannot create '{}'", (root / name_).string()));
  }

  TensorRef put(const Tensor& t) {
    TensorRef ref{name_, t.shape, offset_};
    std::vector<unsigned char> bytes(4 * t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(t.data[i]);
      for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out_) throw Error(ErrorCode::Io, fmt::format("write failed on '{}'", name_));
    offset_ += bytes.size();
    return ref;
  }

 private:
  std::string name_;
  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

}  // namespace

DumpManifest write_dump(const DumpData& data, const fs::path& out_dir) {
  if (data.hidden.empty() || data.hidden[0].rank() != 2) {
    throw Error(ErrorCode::InvalidArgument, "write_dump: need at least one rank-2 hidden tensor");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

  DumpManifest m;
  m.root = out_dir;
  m.model_name = data.model_name;
  m.num_layers = data.hidden.size() - 1;
  m.num_tokens = data.hidden[0].shape[0];
  m.hidden_size = data.hidden[0].shape[1];
  m.num_heads = data.num_heads;
  m.head_dim = data.num_heads ? m.hidden_size / data.num_heads : 0;
  m.norm_kind = data.norm_kind;
  m.tokens = data.tokens;
  m.spans = data.spans;
  m.caption = data.caption;

  for (std::size_t l = 0; l < data.hidden.size(); ++l) {
    BinWriter bin(out_dir, fmt::format("layer_{:03}.bin", l));
    LayerRecord rec;
    rec.hidden = bin.put(data.hidden[l]);
    if (l >= 1 && l - 1 < data.blocks.size()) {
      const LayerTensors& b = data.blocks[l - 1];
      AttentionRefs a;
      a.attn_probs = bin.put(b.attn_probs);
      a.attn_input = bin.put(b.attn_input);
      a.w_v = bin.put(b.w_v);
      a.b_v = bin.put(b.b_v);
      a.w_o = bin.put(b.w_o);
      a.b_o = bin.put(b.b_o);
      rec.attention = std::move(a);
    }
    m.layers.push_back(std::move(rec));
  }

  {
    BinWriter bin(out_dir, "head.bin");
    m.head.unembedding = bin.put(data.head.unembedding);
    m.head.norm_gamma = bin.put(data.head.norm_gamma);
    m.head.norm_beta = bin.put(data.head.norm_beta);
  }
  m.head.norm_eps = data.head.norm_eps;
  m.head.vocab_path = "vocab.txt";
  m.head.vocab = data.head.vocab;
  {
    std::ofstream vocab(out_dir / "vocab.txt", std::ios::binary | std::ios::trunc);
    for (const std::string& word : data.head.vocab) vocab << word << '\n';
    if (!vocab) throw Error(ErrorCode::Io, "vocab write failed");
  }
  write_manifest(m);
  return m;
}

}  // namespace mmdyn
