#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "explanova/pipeline.hpp"

namespace {

struct CliValues {
  std::string input;
  std::string output;
  std::string cache_dir;
  std::string config;
  std::string llm_endpoint;
  std::string llm_model;
  std::string question;
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  bool mock_llm = false;
  bool force = false;
  bool auto_analyze = false;
};

void add_common_flags(CLI::App* sub, CliValues& v) {
  sub->add_option("-i,--input", v.input, "CSV file to analyze");
  sub->add_option("--cache-dir", v.cache_dir, "analysis cache directory (default .explanova_cache)");
  sub->add_option("-c,--config", v.config, "key = value config file; explicit flags win");
  sub->add_option("--llm-endpoint", v.llm_endpoint,
                  "chat-completions endpoint base URL (OpenAI-compatible)");
  sub->add_option("--llm-model", v.llm_model, "model name sent with each request");
  sub->add_flag("--mock-llm", v.mock_llm, "deterministic offline gateway (no network)");
  sub->add_flag("--force", v.force, "recompute even when a cached analysis matches");
  sub->add_option("--seed", v.seed, "master seed for every stochastic step");
  sub->add_option("--workers", v.workers, "worker threads (0 = hardware concurrency)");
}

// flags > config file > defaults
void merge_into(CLI::App* sub, const CliValues& v, explanova::RunConfig& cfg) {
  auto given = [&](const std::string& name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--config")) explanova::apply_config_file(cfg, v.config);
  if (given("--input")) cfg.input_path = v.input;
  if (given("--output")) cfg.output_path = v.output;
  if (given("--cache-dir")) cfg.cache_dir = v.cache_dir;
  if (given("--llm-endpoint")) cfg.llm.endpoint_url = v.llm_endpoint;
  if (given("--llm-model")) cfg.llm.model_name = v.llm_model;
  if (given("--mock-llm")) cfg.llm.mock_mode = v.mock_llm;
  if (given("--force")) cfg.force = v.force;
  if (given("--seed")) cfg.seed = v.seed;
  if (given("--workers")) cfg.workers = v.workers;
  if (given("--auto-analyze")) cfg.auto_analyze = v.auto_analyze;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"explanova: automated statistical insight reports for CSV tables"};
  app.require_subcommand(1);

  CliValues av;
  CLI::App* analyze = app.add_subcommand("analyze", "run the full insight pipeline over a CSV");
  add_common_flags(analyze, av);
  analyze->add_option("-o,--output", av.output, "write the report here instead of stdout");

  CliValues qv;
  CLI::App* qa = app.add_subcommand("qa", "answer a question about an analyzed CSV");
  add_common_flags(qa, qv);
  qa->add_option("-q,--question", qv.question, "question to answer from the report")->required();
  qa->add_flag("--auto-analyze", qv.auto_analyze, "analyze first when the cache misses");

  CLI11_PARSE(app, argc, argv);

  try {
    explanova::RunConfig cfg;
    if (analyze->parsed()) {
      merge_into(analyze, av, cfg);
      if (cfg.input_path.empty()) {
        std::cerr << "error: no input CSV given (use --input or a config file)\n";
        return 2;
      }
      return explanova::run_analyze(cfg);
    }
    merge_into(qa, qv, cfg);
    if (cfg.input_path.empty()) {
      std::cerr << "error: no input CSV given (use --input or a config file)\n";
      return 2;
    }
    return explanova::run_qa(cfg, qv.question);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
