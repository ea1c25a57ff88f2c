#pragma once

// Orchestrates the analyses over one or more dumps and writes the report
// bundle (CSV, JSON, JSONL, SVG and an index report.json with hashes).

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mmdyn/contextualization.hpp"
#include "mmdyn/logit_lens.hpp"
#include "mmdyn/norm_attention.hpp"

namespace mmdyn {

enum class Analysis { Contextualization, Intra, Attention, LogitLens, Phases };

std::string_view to_string(Analysis a) noexcept;

/// Comma-separated names; the empty string yields the empty set.
std::set<Analysis> parse_analyses(std::string_view list);

struct RunConfig {
  std::vector<std::filesystem::path> dump_paths;  // aggregation follows this order
  std::set<Analysis> analyses;
  std::size_t k = kDefaultTopK;  // LogitLens decodes per visual token
  std::size_t top_tokens = 5;    // top_attended_tokens k
  std::size_t smooth_window = 3;
  double deadband = 0.002;
  std::size_t target_phases = 4;
  SaliencyMode saliency_mode = SaliencyMode::HeadSum;
  std::optional<std::filesystem::path> stoplist_path;
  std::filesystem::path out_dir;
  unsigned threads = 0;  // 0 = hardware concurrency; never affects output bytes
};

struct EmittedFile {
  std::string name;  // relative to out_dir
  std::string sha256;
  std::size_t bytes = 0;
};

struct ReportBundle {
  std::optional<SimilarityCurve> inter;
  std::optional<SimilarityCurve> intra_visual;
  std::optional<SimilarityCurve> intra_text;
  std::optional<PhaseDiagram> phases;
  std::vector<SaliencyStack> saliency;  // one per dump
  std::vector<TopTokens> top_tokens;    // one per dump
  std::optional<RecallCurve> recall;
  std::vector<EmittedFile> files;  // analysis outputs, excluding report.json
  std::string report_json;
  std::string report_sha256;
};

/// Validates every dump, runs the requested analyses and writes the bundle.
/// On any error nothing is left behind in out_dir and the error names the
/// offending dump path.
ReportBundle run_analysis(const RunConfig& cfg);

/// Reads MMDYN_THREADS if set; otherwise returns `flag_value`.
unsigned threads_from_env(unsigned flag_value);

}  // namespace mmdyn
