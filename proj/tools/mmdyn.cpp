#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mmdyn/dump_io.hpp"
#include "mmdyn/error.hpp"
#include "mmdyn/report.hpp"
#include "mmdyn/version.hpp"

namespace {

int run_validate(const std::vector<std::string>& paths, bool verbose) {
  int failed = 0;
  for (const std::string& path : paths) {
    try {
      const mmdyn::DumpManifest manifest = mmdyn::read_manifest(path);
      const mmdyn::ValidationReport report = mmdyn::validate_dump(manifest);
      const auto failures = report.failures();
      fmt::print("{}: {} ({} checks, {} failed)\n", path, report.ok() ? "ok" : "FAILED", report.checks.size(),
                 failures.size());
      for (const auto& c : verbose ? report.checks : failures) {
        fmt::print("  [{}] {}{}{}\n", c.ok ? "pass" : "FAIL", c.name, c.detail.empty() ? "" : ": ", c.detail);
      }
      failed += report.ok() ? 0 : 1;
    } catch (const mmdyn::Error& e) {
      fmt::print("{}: FAILED\n  [FAIL] {}\n", path, e.what());
      ++failed;
    }
  }
  return failed == 0 ? 0 : 1;
}

int run_analyze(mmdyn::RunConfig cfg, const std::string& analyses, const std::string& saliency_mode) {
  cfg.analyses = mmdyn::parse_analyses(analyses);
  if (saliency_mode == "per_head_sum") {
    cfg.saliency_mode = mmdyn::SaliencyMode::PerHeadSum;
  } else if (saliency_mode != "head_sum") {
    throw mmdyn::Error(mmdyn::ErrorCode::InvalidArgument,
                       fmt::format("--saliency-mode '{}' (expected head_sum or per_head_sum)", saliency_mode));
  }
  cfg.threads = mmdyn::threads_from_env(cfg.threads);

  const mmdyn::ReportBundle bundle = mmdyn::run_analysis(cfg);
  if (bundle.phases) {
    fmt::print("phases: boundaries [{}] canonical={}\n", fmt::join(bundle.phases->boundaries, ","),
               bundle.phases->canonical);
  }
  for (const auto& f : bundle.files) fmt::print("{}  {}\n", f.sha256, f.name);
  fmt::print("{}  report.json\n", bundle.report_sha256);
  return 0;
}

int run_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
  std::ifstream in(spec_path, std::ios::binary);
  if (!in) throw mmdyn::Error(mmdyn::ErrorCode::MissingFile, fmt::format("spec '{}' not readable", spec_path));
  std::ostringstream text;
  text << in.rdbuf();
  const mmdyn::SynthSpec spec = mmdyn::parse_synth_spec(text.str());
  const mmdyn::DumpManifest manifest = mmdyn::generate_synthetic_dump(spec, seed, out_dir);
  fmt::print("wrote {} (L={}, T={}, d={}, H={}, V={})\n", (manifest.root / "manifest.json").string(),
             manifest.num_layers, manifest.num_tokens, manifest.hidden_size, manifest.num_heads,
             manifest.head.vocab.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmdyn: layer-wise multimodal interaction profiler for transformer dump archives", "mmdyn"};
  app.set_version_flag("--version", std::string(mmdyn::kVersion));
  app.require_subcommand(1);

  std::vector<std::string> validate_paths;
  bool verbose = false;
  CLI::App* validate = app.add_subcommand("validate", "Check dump archives against the format invariants");
  validate->add_option("dumps", validate_paths, "Dump directories or manifest.json files")->required();
  validate->add_flag("-v,--verbose", verbose, "List passing checks too");

  mmdyn::RunConfig cfg;
  std::vector<std::string> dump_paths;
  std::string analyses = "contextualization,intra,attention,logitlens,phases";
  std::string saliency_mode = "head_sum";
  std::string stoplist;
  std::string out_dir;
  CLI::App* analyze = app.add_subcommand("analyze", "Run analyses over one or more dumps and write a report");
  analyze->add_option("dumps", dump_paths, "Dumps, aggregated in the order given")->required();
  analyze->add_option("--analyses", analyses,
                      "Comma-separated subset of contextualization,intra,attention,logitlens,phases (empty = validate only)")
      ->capture_default_str();
  analyze->add_option("--k", cfg.k, "LogitLens decodes per visual token")->capture_default_str()->check(CLI::PositiveNumber);
  analyze->add_option("--top-tokens", cfg.top_tokens, "Tokens reported by top_attended_tokens")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  analyze->add_option("--smooth-window", cfg.smooth_window, "Odd moving-average window for phase segmentation")
      ->capture_default_str();
  analyze->add_option("--deadband", cfg.deadband, "Steps with |delta| <= deadband keep the previous direction")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  analyze->add_option("--target-phases", cfg.target_phases, "Maximum number of monotone phases")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  analyze->add_option("--saliency-mode", saliency_mode, "head_sum or per_head_sum (inspection only)")
      ->capture_default_str();
  analyze->add_option("--stoplist", stoplist, "Stoplist file (default: built-in English list)")
      ->check(CLI::ExistingFile);
  analyze->add_option("--out", out_dir, "Output directory")->required();
  analyze->add_option("--threads", cfg.threads, "Worker threads, 0 = all cores (MMDYN_THREADS overrides)")
      ->capture_default_str();

  std::string spec_path;
  std::uint64_t seed = 0;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dump with planted ground truth");
  synth->add_option("--spec", spec_path, "Synthetic spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "RNG seed")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return run_validate(validate_paths, verbose);
    if (*analyze) {
      cfg.dump_paths.assign(dump_paths.begin(), dump_paths.end());
      cfg.out_dir = out_dir;
      if (!stoplist.empty()) cfg.stoplist_path = stoplist;
      return run_analyze(cfg, analyses, saliency_mode);
    }
    if (*synth) return run_synth(spec_path, seed, synth_out);
  } catch (const mmdyn::Error& e) {
    fmt::print(stderr, "mmdyn: error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "mmdyn: error: {}\n", e.what());
    return 1;
  }
  return 0;
}
