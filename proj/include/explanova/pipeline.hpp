#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "explanova/ingest.hpp"
#include "explanova/profile.hpp"
#include "explanova/report.hpp"
#include "explanova/shap.hpp"

namespace explanova {

struct RunConfig {
  std::string input_path;
  std::string output_path;  // empty -> report to stdout
  std::string cache_dir = ".explanova_cache";
  LlmConfig llm;
  CleaningPolicy cleaning;
  SignificanceThresholds thresholds;
  ClusterConfig cluster;
  ShapConfig shap;
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  bool force = false;         // ignore cached entries
  bool auto_analyze = false;  // qa: analyze on a cache miss instead of failing
};

// Digest over every analysis-affecting knob (cleaning, thresholds,
// clustering, attribution, seed, and the model/prompt-visible gateway
// settings). Paths, worker count, retry/timeout tuning, and endpoint do not
// change results and are excluded.
std::string config_digest(const RunConfig& cfg);

// Reads `key = value` lines ('#'/';' comments, optional [section] headers
// which are ignored). Unknown keys throw. Applies every recognized key, so
// callers layer explicit command-line flags on top afterwards.
void apply_config_file(RunConfig& cfg, const std::string& path);

struct AnalysisResult {
  std::string report_text;
  bool from_cache = false;
  CacheEntry entry;
};

// Full pipeline over raw CSV bytes: parse, type, clean/encode, profile,
// cluster, pairwise scan, per-target modeling + attribution, report, cache.
// A cache hit (same table name, content, config) skips all computation.
AnalysisResult run_analysis(const RunConfig& cfg, std::string_view csv_bytes,
                            const std::string& table_name, std::ostream* progress = nullptr);

// CLI drivers. Exit codes: 0 success, 1 analysis/QA failure, 2 unreadable
// input file, 3 qa cache miss without --auto-analyze.
int run_analyze(const RunConfig& cfg);
int run_qa(const RunConfig& cfg, const std::string& question);

}  // namespace explanova
