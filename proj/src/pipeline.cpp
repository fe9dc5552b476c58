#include "explanova/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace explanova {

namespace {

void digest_add(std::string& canon, std::string_view key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  canon += key;
  canon += '=';
  canon += buf;
  canon += ';';
}

void digest_add(std::string& canon, std::string_view key, std::string_view v) {
  canon += key;
  canon += '=';
  canon += v;
  canon += ';';
}

}  // namespace

std::string config_digest(const RunConfig& cfg) {
  std::string canon;
  digest_add(canon, "missing_drop_threshold", cfg.cleaning.missing_drop_threshold);
  digest_add(canon, "outlier_drop_threshold", cfg.cleaning.outlier_drop_threshold);
  digest_add(canon, "fence_multiplier", cfg.cleaning.fence_multiplier);
  digest_add(canon, "impute", cfg.cleaning.impute == ImputeStrategy::Median ? "median" : "mean");
  digest_add(canon, "pearson_abs", cfg.thresholds.pearson_abs);
  digest_add(canon, "spearman_abs", cfg.thresholds.spearman_abs);
  digest_add(canon, "mutual_info", cfg.thresholds.mutual_info);
  digest_add(canon, "anova_p", cfg.thresholds.anova_p);
  digest_add(canon, "eta_squared", cfg.thresholds.eta_squared);
  digest_add(canon, "chi2_p", cfg.thresholds.chi2_p);
  digest_add(canon, "cramers_v", cfg.thresholds.cramers_v);
  digest_add(canon, "min_cluster_size", static_cast<double>(cfg.cluster.min_cluster_size));
  digest_add(canon, "min_samples", static_cast<double>(cfg.cluster.min_samples));
  digest_add(canon, "quality_threshold", cfg.cluster.quality_threshold);
  digest_add(canon, "enumeration_limit", static_cast<double>(cfg.shap.enumeration_limit));
  digest_add(canon, "sample_budget", static_cast<double>(cfg.shap.sample_budget));
  digest_add(canon, "explained_row_cap", static_cast<double>(cfg.shap.explained_row_cap));
  digest_add(canon, "background_row_cap", static_cast<double>(cfg.shap.background_row_cap));
  digest_add(canon, "perturbation_folds", static_cast<double>(cfg.shap.perturbation_folds));
  digest_add(canon, "seed", static_cast<double>(cfg.seed));
  digest_add(canon, "mock_llm", cfg.llm.mock_mode ? "1" : "0");
  digest_add(canon, "llm_model", cfg.llm.model_name);
  digest_add(canon, "llm_temperature", cfg.llm.temperature);
  digest_add(canon, "context_char_budget", static_cast<double>(cfg.llm.context_char_budget));
  return hex64(fnv1a64(canon));
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ExplanovaError("cannot read config file " + path);

  auto parse_bool = [&](const std::string& key, const std::string& v) {
    std::string t = to_lower(trim(v));
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ExplanovaError("config key '" + key + "' expects a boolean, got '" + v + "'");
  };
  auto parse_num = [&](const std::string& key, const std::string& v) {
    auto d = parse_double(v);
    if (!d) throw ExplanovaError("config key '" + key + "' expects a number, got '" + v + "'");
    return *d;
  };

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"input", [&](const std::string&, const std::string& v) { cfg.input_path = v; }},
      {"output", [&](const std::string&, const std::string& v) { cfg.output_path = v; }},
      {"cache_dir", [&](const std::string&, const std::string& v) { cfg.cache_dir = v; }},
      {"seed",
       [&](const std::string& k, const std::string& v) {
         cfg.seed = static_cast<std::uint64_t>(parse_num(k, v));
       }},
      {"workers",
       [&](const std::string& k, const std::string& v) {
         cfg.workers = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"force",
       [&](const std::string& k, const std::string& v) { cfg.force = parse_bool(k, v); }},
      {"auto_analyze",
       [&](const std::string& k, const std::string& v) { cfg.auto_analyze = parse_bool(k, v); }},
      {"llm_endpoint",
       [&](const std::string&, const std::string& v) { cfg.llm.endpoint_url = v; }},
      {"llm_model", [&](const std::string&, const std::string& v) { cfg.llm.model_name = v; }},
      {"llm_api_key", [&](const std::string&, const std::string& v) { cfg.llm.api_key = v; }},
      {"llm_temperature",
       [&](const std::string& k, const std::string& v) { cfg.llm.temperature = parse_num(k, v); }},
      {"llm_timeout_seconds",
       [&](const std::string& k, const std::string& v) {
         cfg.llm.timeout_seconds = parse_num(k, v);
       }},
      {"llm_max_retries",
       [&](const std::string& k, const std::string& v) {
         cfg.llm.max_retries = static_cast<int>(parse_num(k, v));
       }},
      {"llm_backoff_initial_ms",
       [&](const std::string& k, const std::string& v) {
         cfg.llm.backoff_initial_ms = static_cast<int>(parse_num(k, v));
       }},
      {"llm_max_concurrency",
       [&](const std::string& k, const std::string& v) {
         cfg.llm.max_concurrency = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"llm_context_char_budget",
       [&](const std::string& k, const std::string& v) {
         cfg.llm.context_char_budget = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"mock_llm",
       [&](const std::string& k, const std::string& v) { cfg.llm.mock_mode = parse_bool(k, v); }},
      {"missing_drop_threshold",
       [&](const std::string& k, const std::string& v) {
         cfg.cleaning.missing_drop_threshold = parse_num(k, v);
       }},
      {"outlier_drop_threshold",
       [&](const std::string& k, const std::string& v) {
         cfg.cleaning.outlier_drop_threshold = parse_num(k, v);
       }},
      {"fence_multiplier",
       [&](const std::string& k, const std::string& v) {
         cfg.cleaning.fence_multiplier = parse_num(k, v);
       }},
      {"impute",
       [&](const std::string& k, const std::string& v) {
         std::string t = to_lower(trim(v));
         if (t == "median") {
           cfg.cleaning.impute = ImputeStrategy::Median;
         } else if (t == "mean") {
           cfg.cleaning.impute = ImputeStrategy::Mean;
         } else {
           throw ExplanovaError("config key '" + k + "' expects median or mean, got '" + v + "'");
         }
       }},
      {"pearson_abs",
       [&](const std::string& k, const std::string& v) {
         cfg.thresholds.pearson_abs = parse_num(k, v);
       }},
      {"spearman_abs",
       [&](const std::string& k, const std::string& v) {
         cfg.thresholds.spearman_abs = parse_num(k, v);
       }},
      {"mutual_info",
       [&](const std::string& k, const std::string& v) {
         cfg.thresholds.mutual_info = parse_num(k, v);
       }},
      {"anova_p",
       [&](const std::string& k, const std::string& v) { cfg.thresholds.anova_p = parse_num(k, v); }},
      {"eta_squared",
       [&](const std::string& k, const std::string& v) {
         cfg.thresholds.eta_squared = parse_num(k, v);
       }},
      {"chi2_p",
       [&](const std::string& k, const std::string& v) { cfg.thresholds.chi2_p = parse_num(k, v); }},
      {"cramers_v",
       [&](const std::string& k, const std::string& v) {
         cfg.thresholds.cramers_v = parse_num(k, v);
       }},
      {"min_cluster_size",
       [&](const std::string& k, const std::string& v) {
         cfg.cluster.min_cluster_size = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"min_samples",
       [&](const std::string& k, const std::string& v) {
         cfg.cluster.min_samples = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"quality_threshold",
       [&](const std::string& k, const std::string& v) {
         cfg.cluster.quality_threshold = parse_num(k, v);
       }},
      {"enumeration_limit",
       [&](const std::string& k, const std::string& v) {
         cfg.shap.enumeration_limit = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"sample_budget",
       [&](const std::string& k, const std::string& v) {
         cfg.shap.sample_budget = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"explained_row_cap",
       [&](const std::string& k, const std::string& v) {
         cfg.shap.explained_row_cap = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"background_row_cap",
       [&](const std::string& k, const std::string& v) {
         cfg.shap.background_row_cap = static_cast<std::size_t>(parse_num(k, v));
       }},
      {"perturbation_folds",
       [&](const std::string& k, const std::string& v) {
         cfg.shap.perturbation_folds = static_cast<std::size_t>(parse_num(k, v));
       }},
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') continue;  // organizational only
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ExplanovaError("config line " + std::to_string(line_no) + " is not key = value: '" +
                           t + "'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ExplanovaError("unknown config key '" + key + "' on line " + std::to_string(line_no));
    }
    it->second(key, value);
  }
}

namespace {

void note(std::ostream* progress, const std::string& msg) {
  if (progress) (*progress) << "[explanova] " << msg << "\n";
}

json dataset_context(const FeatureTable& table) {
  json names = json::array();
  for (const auto& f : table.features) names.push_back(f.name);
  return json{{"dataset_name", table.name},
              {"n_rows", table.n_rows},
              {"n_features", table.features.size()},
              {"feature_names", names}};
}

json feature_context(const Feature& f) {
  if (f.is_discrete()) {
    DiscreteStats s = discrete_summary(f);
    std::string top =
        s.frequencies.empty() ? std::string{} : f.label_of(s.frequencies.front().first);
    return json{{"feature_name", f.name},
                {"kind", "discrete"},
                {"stats",
                 {{"n_categories", s.n_categories},
                  {"top_category", top},
                  {"missing_imputed", f.missing_imputed}}}};
  }
  ContinuousStats s = continuous_summary(f.values);
  return json{{"feature_name", f.name},
              {"kind", "continuous"},
              {"stats",
               {{"mean", s.mean},
                {"std_dev", s.std_dev},
                {"min", s.min},
                {"max", s.max},
                {"median", s.median},
                {"missing_imputed", f.missing_imputed},
                {"outliers_clipped", f.outliers_clipped}}}};
}

std::string fallback_dataset_description(const FeatureTable& table) {
  return "Dataset '" + table.name + "' holds " + std::to_string(table.n_rows) + " rows across " +
         std::to_string(table.features.size()) + " usable features.";
}

std::string fallback_feature_description(const Feature& f) {
  if (f.is_discrete()) {
    DiscreteStats s = discrete_summary(f);
    std::string top =
        s.frequencies.empty() ? std::string{} : f.label_of(s.frequencies.front().first);
    return "Feature '" + f.name + "' is a discrete variable with " +
           std::to_string(s.n_categories) + " categories, led by '" + top + "'.";
  }
  ContinuousStats s = continuous_summary(f.values);
  return "Feature '" + f.name + "' is a continuous variable with mean " + fmt_fixed(s.mean) +
         " and standard deviation " + fmt_fixed(s.std_dev) + ".";
}

}  // namespace

AnalysisResult run_analysis(const RunConfig& cfg, std::string_view csv_bytes,
                            const std::string& table_name, std::ostream* progress) {
  RawTable raw = parse_csv(csv_bytes, table_name);
  note(progress, "parsed " + std::to_string(raw.n_rows()) + " rows x " +
                     std::to_string(raw.n_cols()) + " columns from '" + table_name + "'");

  const std::string digest = config_digest(cfg);
  if (!cfg.force) {
    if (auto hit = cache_load(cfg.cache_dir, raw.name, raw.content_hash, digest)) {
      note(progress, "cache hit (" +
                         cache_path(cfg.cache_dir, raw.name, raw.content_hash).string() +
                         "); skipping analysis");
      AnalysisResult out;
      out.report_text = hit->report_text;
      out.from_cache = true;
      out.entry = std::move(*hit);
      return out;
    }
  }

  LlmClient llm(cfg.llm);
  std::vector<FeatureKind> kinds = infer_feature_types(raw, llm, cfg.workers);
  FeatureTable table = encode_features(raw, kinds, cfg.cleaning, cfg.workers);
  if (table.features.empty()) throw ExplanovaError("no usable features after cleaning");
  note(progress, "encoded " + std::to_string(table.features.size()) + " features (" +
                     std::to_string(table.dropped.size()) + " columns dropped)");

  // modeling targets are the original features; the cluster feature (added
  // next) joins only as a predictor
  std::vector<std::string> targets;
  targets.reserve(table.features.size());
  for (const auto& f : table.features) targets.push_back(f.name);

  ClusterOutcome cl = cluster_feature(table, cfg.cluster, cfg.workers);
  note(progress, "clustering: " + cl.note);

  // one batched pass for the dataset blurb plus every feature description
  std::vector<LlmRequest> desc_requests;
  desc_requests.push_back({PromptKind::FeatureDescription, dataset_context(table)});
  for (const auto& f : table.features) {
    desc_requests.push_back({PromptKind::FeatureDescription, feature_context(f)});
  }
  std::vector<LlmOutcome> desc = llm.chat_batch(desc_requests);
  std::string dataset_description =
      desc[0].ok ? desc[0].text : fallback_dataset_description(table);
  for (std::size_t i = 0; i < table.features.size(); ++i) {
    Feature& f = table.features[i];
    if (f.description.empty()) {
      f.description = desc[i + 1].ok ? desc[i + 1].text : fallback_feature_description(f);
    }
  }

  std::vector<PairwiseRelation> relations =
      analyze_all_pairs(table, cfg.thresholds, llm, cfg.workers);
  std::size_t n_significant = 0;
  for (const auto& rel : relations)
    if (rel.significant) ++n_significant;
  note(progress, "pairwise scan: " + std::to_string(n_significant) + " of " +
                     std::to_string(relations.size()) + " ordered pairs significant");

  ShapConfig scfg = cfg.shap;
  scfg.seed = cfg.seed;
  ModelHyperparams hp;
  std::vector<TargetOutcome> outcomes(targets.size());
  parallel_for(targets.size(), cfg.workers, [&](std::size_t i) {
    outcomes[i] = analyze_target(table, targets[i], llm, scfg, hp, 1);
  });
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const TargetOutcome& a, const TargetOutcome& b) {
                     if (a.analyzed != b.analyzed) return a.analyzed;
                     if (!a.analyzed) return false;
                     return a.analysis.credibility.score > b.analysis.credibility.score;
                   });
  std::size_t analyzed = 0;
  for (const auto& o : outcomes)
    if (o.analyzed) ++analyzed;
  note(progress, "modeled " + std::to_string(analyzed) + " of " + std::to_string(targets.size()) +
                     " targets");

  ReportMeta meta;
  meta.dataset_description = dataset_description;
  meta.cluster_note = cl.note;
  meta.thresholds = cfg.thresholds;
  meta.seed = cfg.seed;
  meta.generated_at = now_timestamp();

  AnalysisResult out;
  out.report_text = assemble_report(table, relations, outcomes, meta);
  out.from_cache = false;
  out.entry.table_name = table.name;
  out.entry.content_hash_hex = hex64(raw.content_hash);
  out.entry.config_digest_hex = digest;
  out.entry.report_text = out.report_text;
  out.entry.payload = report_payload(table, relations, outcomes, meta);
  cache_store(cfg.cache_dir, out.entry);
  note(progress, "cached analysis at " +
                     cache_path(cfg.cache_dir, raw.name, raw.content_hash).string());
  return out;
}

namespace {

std::optional<std::string> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return buffer.str();
}

std::string table_name_of(const std::string& path) {
  std::string stem = std::filesystem::path(path).stem().string();
  return stem.empty() ? "table" : stem;
}

}  // namespace

int run_analyze(const RunConfig& cfg) {
  auto bytes = read_file_bytes(cfg.input_path);
  if (!bytes) {
    std::cerr << "error: cannot read input file '" << cfg.input_path << "'\n";
    return 2;
  }
  try {
    AnalysisResult result = run_analysis(cfg, *bytes, table_name_of(cfg.input_path), &std::cerr);
    if (cfg.output_path.empty()) {
      std::cout << result.report_text;
    } else {
      std::ofstream out(cfg.output_path, std::ios::binary | std::ios::trunc);
      if (!out) {
        std::cerr << "error: cannot write report to '" << cfg.output_path << "'\n";
        return 1;
      }
      out << result.report_text;
      std::cerr << "[explanova] report written to " << cfg.output_path << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_qa(const RunConfig& cfg, const std::string& question) {
  auto bytes = read_file_bytes(cfg.input_path);
  if (!bytes) {
    std::cerr << "error: cannot read input file '" << cfg.input_path << "'\n";
    return 2;
  }
  try {
    const std::string name = table_name_of(cfg.input_path);
    const std::uint64_t hash = fnv1a64(*bytes);
    std::string report;
    if (auto hit = cache_load(cfg.cache_dir, name, hash, config_digest(cfg)); hit && !cfg.force) {
      report = hit->report_text;
      std::cerr << "[explanova] answering from cached analysis\n";
    } else if (cfg.auto_analyze || cfg.force) {
      report = run_analysis(cfg, *bytes, name, &std::cerr).report_text;
    } else {
      std::cerr << "error: no cached analysis for this input and config; run the analyze "
                   "command first or pass --auto-analyze\n";
      return 3;
    }
    LlmClient llm(cfg.llm);
    std::cout << answer_question(report, question, llm) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace explanova
