#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "explanova/llm.hpp"
#include "explanova/pairwise.hpp"
#include "explanova/profile.hpp"
#include "explanova/shap.hpp"

namespace explanova {

struct ReportMeta {
  std::string dataset_description;
  std::string cluster_note;
  SignificanceThresholds thresholds;
  std::uint64_t seed = 42;
  std::string generated_at;  // empty -> now_timestamp() at render time
};

// Plain-text report: header, feature profiles, significant relationships,
// model credibility + attributions. Target outcomes are rendered in the
// order given (the pipeline ranks them by credibility score first).
std::string assemble_report(const FeatureTable& table,
                            const std::vector<PairwiseRelation>& relations,
                            const std::vector<TargetOutcome>& outcomes, const ReportMeta& meta);

// Report text minus volatile lines (the generation timestamp); two runs over
// identical input and config must agree byte-for-byte on this.
std::string report_body(const std::string& report_text);

// Structured snapshot cached alongside the rendered text.
json report_payload(const FeatureTable& table, const std::vector<PairwiseRelation>& relations,
                    const std::vector<TargetOutcome>& outcomes, const ReportMeta& meta);

struct CacheEntry {
  std::string table_name;
  std::string content_hash_hex;
  std::string config_digest_hex;
  std::string report_text;
  json payload;
};

std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& table_name,
                                 std::uint64_t content_hash);

// Atomic write (temp file + rename) of one entry per (table, content) pair.
void cache_store(const std::filesystem::path& dir, const CacheEntry& entry);

// Hit only when table name, content hash, and config digest all match;
// unreadable or corrupt files are plain misses.
std::optional<CacheEntry> cache_load(const std::filesystem::path& dir,
                                     const std::string& table_name, std::uint64_t content_hash,
                                     const std::string& config_digest_hex);

// Question answering over the rendered report: a single call when the prompt
// fits the context budget, otherwise line-aligned chunks (whose concatenation
// reproduces the report exactly) answered in parallel plus one reduce call.
// Throws when every chunk fails; partial failures are noted in the answer.
std::string answer_question(const std::string& report_text, const std::string& question,
                            const LlmClient& llm);

}  // namespace explanova
