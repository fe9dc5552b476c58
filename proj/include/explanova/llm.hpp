#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "explanova/util.hpp"

namespace explanova {

using json = nlohmann::json;

class LlmError : public ExplanovaError {
 public:
  explicit LlmError(const std::string& what, int status = 0)
      : ExplanovaError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct LlmConfig {
  std::string endpoint_url = "http://localhost:8000/v1";
  std::string model_name = "qwen3-8b";
  std::string api_key;  // falls back to EXPLANOVA_API_KEY
  double temperature = 0.0;
  double timeout_seconds = 60.0;
  int max_retries = 2;       // retries after the first attempt, transport/5xx only
  int backoff_initial_ms = 200;
  std::size_t max_concurrency = 8;
  std::size_t context_char_budget = 24000;
  bool mock_mode = false;
};

enum class PromptKind {
  TypeInference,
  FeatureDescription,
  RelationDescription,
  ShapInterpretation,
  QaChunk,
  QaReduce,
};

const char* to_string(PromptKind kind);

struct LlmRequest {
  PromptKind kind;
  json context;
};

struct LlmOutcome {
  bool ok = false;
  std::string text;
  std::string error;
};

// Chat-completion client against an OpenAI-compatible endpoint, with a fully
// offline deterministic mock mode (no sockets are ever opened in mock mode).
class LlmClient {
 public:
  explicit LlmClient(LlmConfig cfg);

  // Renders the prompt for `kind`, enforces the context budget, and returns
  // the completion text. Throws LlmError on failure.
  std::string chat(PromptKind kind, const json& context) const;

  // Bounded-concurrency batch; outcome i always corresponds to request i and
  // individual failures never abort the batch.
  std::vector<LlmOutcome> chat_batch(const std::vector<LlmRequest>& requests) const;

  // Prompt text assembly; QaChunk/QaReduce embed their payload verbatim so
  // prompt size is exactly template overhead plus payload bytes.
  static std::string render_prompt(PromptKind kind, const json& context);

  std::uint64_t total_calls() const { return calls_.load(); }
  const LlmConfig& config() const { return cfg_; }

 private:
  std::string live_chat(const std::string& prompt) const;
  static std::string mock_response(PromptKind kind, const json& context);

  LlmConfig cfg_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

}  // namespace explanova
