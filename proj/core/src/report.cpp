#include "mmdyn/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mmdyn/error.hpp"
#include "mmdyn/hash.hpp"
#include "mmdyn/parallel.hpp"
#include "mmdyn/svg.hpp"
#include "mmdyn/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace mmdyn {

std::string_view to_string(Analysis a) noexcept {
  switch (a) {
    case Analysis::Contextualization: return "contextualization";
    case Analysis::Intra: return "intra";
    case Analysis::Attention: return "attention";
    case Analysis::LogitLens: return "logitlens";
    case Analysis::Phases: return "phases";
  }
  return "?";
}

std::set<Analysis> parse_analyses(std::string_view list) {
  std::set<Analysis> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    std::string_view name = list.substr(0, comma);
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
    if (name.empty()) continue;
    bool matched = false;
    for (Analysis a : {Analysis::Contextualization, Analysis::Intra, Analysis::Attention, Analysis::LogitLens,
                       Analysis::Phases}) {
      if (name == to_string(a)) {
        out.insert(a);
        matched = true;
      }
    }
    if (!matched) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("unknown analysis '{}' (expected contextualization, intra, attention, logitlens, phases)",
                              name));
    }
  }
  return out;
}

unsigned threads_from_env(unsigned flag_value) {
  const char* env = std::getenv("MMDYN_THREADS");
  if (env == nullptr || *env == '\0') return flag_value;
  unsigned value = 0;
  const std::string_view text(env);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("MMDYN_THREADS='{}' is not a non-negative integer", text));
  }
  return value;
}

namespace {

struct PerDump {
  std::optional<SimilarityCurve> inter;
  std::optional<SimilarityCurve> intra_visual;
  std::optional<SimilarityCurve> intra_text;
  std::optional<SaliencyStack> saliency;
  std::optional<TopTokens> top;
  std::vector<DecodedLayer> decoded;
  std::optional<RecallCurve> recall;
};

struct PendingFile {
  std::string name;
  std::string content;
};

void check_config(const RunConfig& cfg) {
  if (cfg.dump_paths.empty()) throw Error(ErrorCode::InvalidArgument, "no dumps given");
  if (cfg.out_dir.empty()) throw Error(ErrorCode::InvalidArgument, "no output directory given");
  if (cfg.k < 1) throw Error(ErrorCode::BadK, "k must be >= 1");
  if (cfg.top_tokens < 1) throw Error(ErrorCode::BadK, "top_tokens must be >= 1");
  if (cfg.smooth_window < 1 || cfg.smooth_window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("smooth_window {} must be odd and >= 1", cfg.smooth_window));
  }
  if (!(cfg.deadband >= 0.0)) throw Error(ErrorCode::InvalidArgument, "deadband must be >= 0");
  if (cfg.target_phases < 1) throw Error(ErrorCode::InvalidArgument, "target_phases must be >= 1");
}

std::string dump_tag(std::size_t index) { return fmt::format("dump{:02}", index); }

std::string top_tokens_json(const std::vector<TopTokens>& tops, const std::vector<SaliencyStack>& stacks,
                            const RunConfig& cfg) {
  ordered_json doc = ordered_json::array();
  for (std::size_t i = 0; i < tops.size(); ++i) {
    ordered_json item;
    item["dump"] = dump_tag(i);
    item["path"] = cfg.dump_paths[i].string();
    item["query_index"] = stacks[i].query_index;
    item["k"] = cfg.top_tokens;
    item["global"] = tops[i].global;
    item["global_scores"] = tops[i].global_scores;
    ordered_json layers = ordered_json::array();
    for (std::size_t r = 0; r < tops[i].per_layer.size(); ++r) {
      layers.push_back({{"layer", stacks[i].layers[r]}, {"top", tops[i].per_layer[r]}});
    }
    item["per_layer"] = std::move(layers);
    doc.push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

/// Writes every file or none: on failure, already written files (and the
/// directory, if this call created it) are removed.
void write_all(const fs::path& out_dir, const std::vector<PendingFile>& files) {
  std::error_code ec;
  const bool existed = fs::exists(out_dir, ec);
  std::vector<fs::path> written;
  try {
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
    for (const PendingFile& f : files) {
      const fs::path target = out_dir / f.name;
      std::ofstream out(target, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", target.string()));
      written.push_back(target);
      out.write(f.content.data(), static_cast<std::streamsize>(f.content.size()));
      out.close();
      if (!out) throw Error(ErrorCode::Io, fmt::format("write failed on '{}'", target.string()));
    }
  } catch (...) {
    for (const fs::path& p : written) fs::remove(p, ec);
    if (!existed) fs::remove(out_dir, ec);
    throw;
  }
}

}  // namespace

ReportBundle run_analysis(const RunConfig& cfg) {
  check_config(cfg);
  const auto has = [&](Analysis a) { return cfg.analyses.count(a) != 0; };
  const bool want_inter = has(Analysis::Contextualization) || has(Analysis::Phases);
  const bool want_intra = has(Analysis::Intra);
  const bool want_attention = has(Analysis::Attention);
  const bool want_lens = has(Analysis::LogitLens);

  const Stoplist stoplist = cfg.stoplist_path ? Stoplist::from_file(*cfg.stoplist_path) : Stoplist::builtin();
  const unsigned threads = resolve_threads(cfg.threads);
  const std::size_t n = cfg.dump_paths.size();
  const unsigned outer = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  const unsigned inner = std::max(1u, threads / std::max(1u, outer));

  auto with_path = [&](std::size_t i, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw e.annotate(cfg.dump_paths[i].string());
    }
  };

  std::vector<std::optional<Dump>> dumps(n);
  parallel_for(n, outer, [&](std::size_t i) { with_path(i, [&] { dumps[i] = Dump::open(cfg.dump_paths[i]); }); });

  std::vector<PerDump> results(n);
  parallel_for(n, outer, [&](std::size_t i) {
    with_path(i, [&] {
      const Dump& dump = *dumps[i];
      PerDump& r = results[i];
      if (want_inter) r.inter = similarity_curve(dump, CurveKind::Inter, inner);
      if (want_intra) {
        r.intra_visual = similarity_curve(dump, CurveKind::IntraVisual, inner);
        r.intra_text = similarity_curve(dump, CurveKind::IntraText, inner);
      }
      if (want_attention) {
        r.saliency = last_token_saliency(dump, inner, cfg.saliency_mode);
        r.top = top_attended_tokens(*r.saliency, std::min(cfg.top_tokens, dump.num_tokens()));
      }
      if (want_lens) {
        const auto& caption = dump.manifest().caption;
        if (!caption) throw Error(ErrorCode::MissingCaption, "dump has no caption");
        r.decoded = verbalize_visual_tokens(dump, cfg.k, inner);
        RecallCurve curve;
        curve.k = cfg.k;
        curve.stoplist_id = stoplist.id();
        for (const DecodedLayer& layer : r.decoded) {
          curve.values.push_back(caption_recall(layer, dump.manifest().head.vocab, *caption, stoplist));
        }
        r.recall = std::move(curve);
      }
    });
  });

  ReportBundle bundle;
  auto collect = [&](auto member) {
    std::vector<SimilarityCurve> curves;
    for (const PerDump& r : results) curves.push_back(*(r.*member));
    return aggregate_curves(curves);
  };
  if (want_inter) bundle.inter = collect(&PerDump::inter);
  if (want_intra) {
    bundle.intra_visual = collect(&PerDump::intra_visual);
    bundle.intra_text = collect(&PerDump::intra_text);
  }
  if (has(Analysis::Phases)) {
    bundle.phases = segment_phases(*bundle.inter, {cfg.smooth_window, cfg.deadband, cfg.target_phases});
  }
  if (want_attention) {
    for (PerDump& r : results) {
      bundle.saliency.push_back(std::move(*r.saliency));
      bundle.top_tokens.push_back(std::move(*r.top));
    }
  }
  if (want_lens) {
    std::vector<RecallCurve> curves;
    for (const PerDump& r : results) curves.push_back(*r.recall);
    bundle.recall = aggregate_recall(curves);
  }

  // Render in a fixed order; the single writer below emits them.
  std::vector<PendingFile> files;
  std::vector<svg::Series> series;
  if (bundle.inter) {
    files.push_back({"inter_curve.csv", curve_to_csv(*bundle.inter)});
    series.push_back({"inter", bundle.inter->values});
  }
  if (bundle.intra_visual) {
    files.push_back({"intra_visual_curve.csv", curve_to_csv(*bundle.intra_visual)});
    files.push_back({"intra_text_curve.csv", curve_to_csv(*bundle.intra_text)});
    series.push_back({"intra_visual", bundle.intra_visual->values});
    series.push_back({"intra_text", bundle.intra_text->values});
  }
  if (bundle.phases) files.push_back({"phases.json", phase_diagram_to_json(*bundle.phases)});
  if (!series.empty()) {
    const std::vector<std::size_t> markers = bundle.phases ? bundle.phases->boundaries : std::vector<std::size_t>{};
    files.push_back({"curves.svg", svg::line_chart(series, "cosine similarity", "contextualization", markers)});
  }
  if (want_attention) {
    for (std::size_t i = 0; i < n; ++i) {
      const SaliencyStack& s = bundle.saliency[i];
      files.push_back({fmt::format("saliency_{}.csv", dump_tag(i)), saliency_to_csv(s)});
      files.push_back({fmt::format("saliency_{}.svg", dump_tag(i)),
                       svg::heatmap(s.rows, s.layers, "layer", "token",
                                    fmt::format("norm-based attention of token {}", s.query_index))});
    }
    files.push_back({"top_tokens.json", top_tokens_json(bundle.top_tokens, bundle.saliency, cfg)});
  }
  if (want_lens) {
    for (std::size_t i = 0; i < n; ++i) {
      files.push_back({fmt::format("logitlens_{}.jsonl", dump_tag(i)),
                       decoded_to_jsonl(results[i].decoded, dumps[i]->manifest().head.vocab)});
    }
    files.push_back({"recall_curve.csv", recall_to_csv(*bundle.recall)});
    const svg::Series recall{"recall", bundle.recall->values};
    files.push_back({"recall.svg", svg::line_chart(std::span(&recall, 1), "recall", "LogitLens caption recall")});
  }

  for (const PendingFile& f : files) bundle.files.push_back({f.name, sha256_hex(f.content), f.content.size()});

  ordered_json report;
  report["tool"] = "mmdyn";
  report["version"] = std::string(kVersion);
  ordered_json config;
  config["analyses"] = ordered_json::array();
  for (Analysis a : cfg.analyses) config["analyses"].push_back(std::string(to_string(a)));
  config["k"] = cfg.k;
  config["top_tokens"] = cfg.top_tokens;
  config["smooth_window"] = cfg.smooth_window;
  config["deadband"] = cfg.deadband;
  config["target_phases"] = cfg.target_phases;
  config["saliency_mode"] = cfg.saliency_mode == SaliencyMode::HeadSum ? "head_sum" : "per_head_sum";
  config["stoplist"] = want_lens ? ordered_json(stoplist.id()) : ordered_json(nullptr);
  report["config"] = std::move(config);
  report["dumps"] = ordered_json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const DumpManifest& m = dumps[i]->manifest();
    ordered_json item;
    item["id"] = dump_tag(i);
    item["path"] = cfg.dump_paths[i].string();
    item["model_name"] = m.model_name;
    item["num_layers"] = m.num_layers;
    item["num_tokens"] = m.num_tokens;
    item["hidden_size"] = m.hidden_size;
    item["num_heads"] = m.num_heads;
    report["dumps"].push_back(std::move(item));
  }
  if (bundle.phases) report["phases"] = ordered_json::parse(phase_diagram_to_json(*bundle.phases));
  report["files"] = ordered_json::array();
  for (const EmittedFile& f : bundle.files) {
    report["files"].push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  }
  bundle.report_json = report.dump(2) + "\n";
  bundle.report_sha256 = sha256_hex(bundle.report_json);

  files.push_back({"report.json", bundle.report_json});
  write_all(cfg.out_dir, files);
  return bundle;
}

}  // namespace mmdyn
