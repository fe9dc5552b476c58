#include "explanova/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "explanova/ingest.hpp"

namespace explanova {

const char* to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::TypeInference: return "type_inference";
    case PromptKind::FeatureDescription: return "feature_description";
    case PromptKind::RelationDescription: return "relation_description";
    case PromptKind::ShapInterpretation: return "shap_interpretation";
    case PromptKind::QaChunk: return "qa_chunk";
    case PromptKind::QaReduce: return "qa_reduce";
  }
  return "unknown";
}

LlmClient::LlmClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.api_key.empty()) {
    if (const char* env = std::getenv("EXPLANOVA_API_KEY")) cfg_.api_key = env;
  }
}

std::string LlmClient::render_prompt(PromptKind kind, const json& context) {
  switch (kind) {
    case PromptKind::TypeInference:
      return "Classify the column described below into exactly one of: continuous, "
             "discrete, categorical, id, time. Reply with the single type token only.\n\n" +
             context.dump(2) + "\n";
    case PromptKind::FeatureDescription:
      return "Write one plain-English sentence describing the dataset or feature "
             "summarized below. Mention the most salient statistic. Reply with the "
             "sentence only.\n\n" +
             context.dump(2) + "\n";
    case PromptKind::RelationDescription:
      return "Write one plain-English sentence describing the statistical relationship "
             "summarized below, citing its strongest metric. Reply with the sentence "
             "only.\n\n" +
             context.dump(2) + "\n";
    case PromptKind::ShapInterpretation:
      return "Write two or three sentences interpreting the attribution summary below "
             "for a non-technical reader: name the top drivers and state how much to "
             "trust the result given its credibility level.\n\n" +
             context.dump(2) + "\n";
    // The two QA prompts append their payload verbatim and last, so the
    // rendered size is exactly the empty-payload overhead plus payload bytes;
    // the chunk packer relies on that to honor the context budget.
    case PromptKind::QaChunk:
      return "Answer the question using only the report chunk that follows. If the "
             "chunk does not contain the answer, reply with the single word "
             "IRRELEVANT.\nQuestion: " +
             context.value("question", std::string{}) + "\n--- REPORT CHUNK ---\n" +
             context.value("payload", std::string{});
    case PromptKind::QaReduce:
      return "Combine the numbered partial answers below into one final answer to the "
             "question. Ignore partials that say IRRELEVANT.\nQuestion: " +
             context.value("question", std::string{}) + "\n--- PARTIAL ANSWERS ---\n" +
             context.value("payload", std::string{});
  }
  throw LlmError("unknown prompt kind");
}

namespace {

std::string join_names(const json& arr, const char* key, std::size_t cap) {
  std::string out;
  std::size_t n = 0;
  for (const auto& item : arr) {
    if (n >= cap) break;
    if (!out.empty()) out += ", ";
    out += item.value(key, std::string{});
    ++n;
  }
  return out;
}

}  // namespace

std::string LlmClient::mock_response(PromptKind kind, const json& context) {
  switch (kind) {
    case PromptKind::TypeInference: {
      // mirror of the deterministic ladder, fed by the same traits the
      // heuristic path sees, so mock and fallback typing always agree
      ColumnTraits t;
      const json& tr = context.value("traits", json::object());
      t.n_rows = context.value("n_rows", std::size_t{0});
      t.non_missing = tr.value("non_missing", std::size_t{0});
      t.distinct = tr.value("distinct", std::size_t{0});
      t.uniqueness_ratio = tr.value("uniqueness_ratio", 0.0);
      t.numeric_fraction = tr.value("numeric_fraction", 0.0);
      t.integer_fraction = tr.value("integer_fraction", 0.0);
      t.date_fraction = tr.value("date_fraction", 0.0);
      t.year_fraction = tr.value("year_fraction", 0.0);
      return to_string(ladder_decision(context.value("column_name", std::string{}), t));
    }
    case PromptKind::FeatureDescription: {
      if (context.contains("dataset_name")) {
        return "Dataset '" + context.value("dataset_name", std::string{}) + "' holds " +
               std::to_string(context.value("n_rows", std::size_t{0})) + " rows across " +
               std::to_string(context.value("n_features", std::size_t{0})) +
               " usable features.";
      }
      std::string name = context.value("feature_name", std::string{});
      std::string kind_word = context.value("kind", std::string{"continuous"});
      const json& stats = context.value("stats", json::object());
      if (kind_word == "discrete") {
        return "Feature '" + name + "' is a discrete variable with " +
               std::to_string(stats.value("n_categories", std::size_t{0})) +
               " categories, led by '" + stats.value("top_category", std::string{}) + "'.";
      }
      return "Feature '" + name + "' is a continuous variable with mean " +
             fmt_fixed(stats.value("mean", 0.0)) + " and standard deviation " +
             fmt_fixed(stats.value("std_dev", 0.0)) + ".";
    }
    case PromptKind::RelationDescription: {
      std::string strongest;
      double best = -1.0;
      const json& metrics = context.value("metrics", json::object());
      for (const auto& [mname, mvalue] : metrics.items()) {
        double mag = std::abs(mvalue.get<double>());
        if (mag > best) {
          best = mag;
          strongest = mname + "=" + fmt_fixed(mvalue.get<double>());
        }
      }
      return "There is a significant " + context.value("kind", std::string{}) +
             " relationship between '" + context.value("source", std::string{}) + "' and '" +
             context.value("target", std::string{}) + "' (" + strongest + ").";
    }
    case PromptKind::ShapInterpretation: {
      std::string drivers = join_names(context.value("top_features", json::array()), "feature", 3);
      return "For target '" + context.value("target", std::string{}) +
             "', the strongest drivers are " + (drivers.empty() ? "none" : drivers) +
             ". Attribution entropy is " + fmt_fixed(context.value("entropy", 0.0)) +
             " against a stability error of " + fmt_fixed(context.value("shap_error", 0.0)) +
             ", giving " + context.value("level", std::string{}) + " credibility (score " +
             fmt_fixed(context.value("score", 0.0)) + ").";
    }
    case PromptKind::QaChunk:
      return "Mock answer to: " + context.value("question", std::string{});
    case PromptKind::QaReduce:
      return "Mock consolidated answer to: " + context.value("question", std::string{});
  }
  throw LlmError("unknown prompt kind");
}

std::string LlmClient::live_chat(const std::string& prompt) const {
  // split endpoint into client base (scheme://host[:port]) and path prefix
  std::string base = cfg_.endpoint_url;
  std::string prefix;
  std::size_t scheme = base.find("://");
  std::size_t slash = base.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash != std::string::npos) {
    prefix = base.substr(slash);
    base = base.substr(0, slash);
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  std::string path = prefix + "/chat/completions";

  json body = {{"model", cfg_.model_name},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", cfg_.temperature}};
  std::string payload = body.dump();

  httplib::Client client(base);
  client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_write_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  std::string last_error = "no attempts made";
  int last_status = 0;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      auto wait = std::chrono::milliseconds(cfg_.backoff_initial_ms << (attempt - 1));
      std::this_thread::sleep_for(wait);
    }
    httplib::Result res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      last_status = 0;
      continue;  // retryable
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      last_status = res->status;
      continue;  // retryable
    }
    if (res->status != 200) {
      throw LlmError("chat request rejected with status " + std::to_string(res->status),
                     res->status);
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) throw LlmError("malformed completion payload", res->status);
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
      throw LlmError("completion payload has no choices", res->status);
    }
    const json& msg = reply["choices"][0].value("message", json::object());
    if (!msg.contains("content") || !msg["content"].is_string()) {
      throw LlmError("completion payload has no message content", res->status);
    }
    return msg["content"].get<std::string>();
  }
  throw LlmError("chat request failed after " + std::to_string(cfg_.max_retries + 1) +
                     " attempts (" + last_error + ")",
                 last_status);
}

std::string LlmClient::chat(PromptKind kind, const json& context) const {
  std::string prompt = render_prompt(kind, context);
  if (prompt.size() > cfg_.context_char_budget) {
    throw LlmError("prompt for " + std::string(to_string(kind)) + " is " +
                   std::to_string(prompt.size()) + " chars, over the " +
                   std::to_string(cfg_.context_char_budget) + "-char context budget");
  }
  calls_.fetch_add(1);
  counters().llm_calls.fetch_add(1);
  if (cfg_.mock_mode) return mock_response(kind, context);
  return live_chat(prompt);
}

std::vector<LlmOutcome> LlmClient::chat_batch(const std::vector<LlmRequest>& requests) const {
  std::vector<LlmOutcome> outcomes(requests.size());
  std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(cfg_.max_concurrency, 1),
                                              std::max<std::size_t>(requests.size(), 1));
  parallel_for(requests.size(), workers, [&](std::size_t i) {
    try {
      outcomes[i].text = chat(requests[i].kind, requests[i].context);
      outcomes[i].ok = true;
    } catch (const std::exception& e) {
      outcomes[i].ok = false;
      outcomes[i].error = e.what();
    }
  });
  return outcomes;
}

}  // namespace explanova
