#include "explanova/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace explanova {

namespace {

constexpr std::size_t kWidth = 80;

std::string rule(char c) { return std::string(kWidth, c); }

std::string centered(const std::string& text) {
  if (text.size() >= kWidth) return text;
  return std::string((kWidth - text.size()) / 2, ' ') + text;
}

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string describe_or_placeholder(const std::string& description) {
  return description.empty() ? "(description unavailable)" : description;
}

void render_feature(std::ostringstream& out, const Feature& f, std::size_t index) {
  out << "[" << index << "] " << f.name << "  ("
      << (f.is_discrete() ? "discrete" : "continuous") << ")\n";
  out << rule('-') << "\n";
  if (f.is_discrete()) {
    DiscreteStats s = discrete_summary(f);
    out << "  categories=" << s.n_categories << ", imputed=" << f.missing_imputed << "\n";
    std::size_t shown = 0;
    for (std::size_t i = 0; i < s.frequencies.size() && shown < 8; ++i, ++shown) {
      auto [code, count] = s.frequencies[i];
      out << "    '" << f.label_of(code) << "' (code " << code << "): " << count << " rows ("
          << fmt_fixed(100.0 * s.proportions[i].second, 2) << "%)\n";
    }
    if (s.frequencies.size() > 8) {
      out << "    ... " << (s.frequencies.size() - 8) << " more categories\n";
    }
  } else {
    ContinuousStats s = continuous_summary(f.values);
    out << "  mean=" << fmt_fixed(s.mean) << ", median=" << fmt_fixed(s.median)
        << ", std_dev=" << fmt_fixed(s.std_dev) << ", variance=" << fmt_fixed(s.variance) << "\n";
    out << "  min=" << fmt_fixed(s.min) << ", q1=" << fmt_fixed(s.q1) << ", q3=" << fmt_fixed(s.q3)
        << ", max=" << fmt_fixed(s.max) << "\n";
    out << "  iqr=" << fmt_fixed(s.iqr) << ", range=" << fmt_fixed(s.range)
        << ", imputed=" << f.missing_imputed << ", clipped=" << f.outliers_clipped << "\n";
  }
  out << "  " << describe_or_placeholder(f.description) << "\n\n";
}

void render_relation(std::ostringstream& out, const PairwiseRelation& rel, std::size_t index) {
  out << "[" << index << "] " << rel.source << " -> " << rel.target << "  ("
      << to_string(rel.kind) << ")\n";
  out << "    ";
  bool first = true;
  for (const auto& [name, value] : rel.metrics.values) {
    if (!first) out << ", ";
    out << name << "=" << fmt_fixed(value);
    first = false;
  }
  out << "\n    " << describe_or_placeholder(rel.description) << "\n\n";
}

void render_analysis(std::ostringstream& out, const ShapAnalysis& a, std::size_t index) {
  out << "[" << index << "] Target: " << a.target << "\n";
  out << rule('-') << "\n";
  out << "  Model: " << a.model_label << " (NLL: " << fmt_fixed(a.nll) << ")\n";
  out << "  CV NLL by family: ";
  bool first = true;
  for (const auto& [label, nll] : a.cv_nll) {
    if (!first) out << ", ";
    out << label << "=" << fmt_fixed(nll);
    first = false;
  }
  out << "\n";
  out << "  Credibility: " << to_string(a.credibility.level) << " (score "
      << fmt_fixed(a.credibility.score) << "; entropy " << fmt_fixed(a.entropy)
      << ", stability error " << fmt_fixed(a.shap_error, 6) << ")\n";
  out << "  Attributions (mean |value| over " << a.global.explained_rows.size()
      << " explained rows):\n";
  std::vector<std::size_t> order(a.global.features.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a.global.mean_abs[x] > a.global.mean_abs[y];
  });
  for (std::size_t j : order) {
    out << "    " << pad_right(a.global.features[j], 24) << " "
        << fmt_fixed(a.global.mean_abs[j], 6) << "\n";
  }
  out << "  " << describe_or_placeholder(a.interpretation) << "\n\n";
}

}  // namespace

std::string assemble_report(const FeatureTable& table,
                            const std::vector<PairwiseRelation>& relations,
                            const std::vector<TargetOutcome>& outcomes, const ReportMeta& meta) {
  std::ostringstream out;
  out << rule('=') << "\n";
  out << centered("EXPLANOVA ANALYSIS REPORT") << "\n";
  out << rule('=') << "\n";
  out << "Dataset   : " << table.name << "\n";
  out << "Rows      : " << table.n_rows << "\n";
  out << "Features  : " << table.features.size() << " usable, " << table.dropped.size()
      << " dropped\n";
  out << "Seed      : " << meta.seed << "\n";
  out << "Generated : " << (meta.generated_at.empty() ? now_timestamp() : meta.generated_at)
      << "\n\n";
  out << describe_or_placeholder(meta.dataset_description) << "\n";
  if (!meta.cluster_note.empty()) out << "Clustering: " << meta.cluster_note << "\n";
  out << "\n";

  out << rule('=') << "\n";
  out << "SECTION 1. FEATURE PROFILES\n";
  out << rule('=') << "\n\n";
  for (std::size_t i = 0; i < table.features.size(); ++i) {
    render_feature(out, table.features[i], i + 1);
  }
  if (!table.dropped.empty()) {
    out << "Dropped columns:\n";
    for (const auto& d : table.dropped) out << "  - " << d.name << ": " << d.reason << "\n";
    out << "\n";
  }

  out << rule('=') << "\n";
  out << "SECTION 2. SIGNIFICANT RELATIONSHIPS\n";
  out << rule('=') << "\n\n";
  out << "Thresholds: |pearson_r|>=" << fmt_compact(meta.thresholds.pearson_abs)
      << ", |spearman_r|>=" << fmt_compact(meta.thresholds.spearman_abs)
      << ", mutual_info>=" << fmt_compact(meta.thresholds.mutual_info)
      << ", anova_p<" << fmt_compact(meta.thresholds.anova_p)
      << ", eta_squared>=" << fmt_compact(meta.thresholds.eta_squared)
      << ", chi2_p<" << fmt_compact(meta.thresholds.chi2_p)
      << ", cramers_v>=" << fmt_compact(meta.thresholds.cramers_v) << "\n";
  std::size_t n_significant = 0;
  for (const auto& rel : relations)
    if (rel.significant) ++n_significant;
  out << n_significant << " of " << relations.size() << " ordered pairs significant.\n\n";
  std::size_t rel_index = 0;
  for (const auto& rel : relations) {
    if (rel.significant) render_relation(out, rel, ++rel_index);
  }
  if (n_significant == 0) out << "No significant relationships found.\n\n";

  out << rule('=') << "\n";
  out << "SECTION 3. MODEL CREDIBILITY AND ATTRIBUTION\n";
  out << rule('=') << "\n\n";
  std::vector<const ShapAnalysis*> ranked;
  std::vector<const TargetOutcome*> skipped;
  for (const auto& o : outcomes) {
    if (o.analyzed) {
      ranked.push_back(&o.analysis);
    } else {
      skipped.push_back(&o);
    }
  }
  if (!ranked.empty()) {
    out << pad_left("Rank", 4) << "  " << pad_right("Feature", 24) << " "
        << pad_left("Score", 12) << "  " << pad_right("Level", 6) << " " << pad_left("H", 8)
        << " " << pad_left("NLL", 10) << " " << pad_left("SHAP-Err", 10) << "\n";
    out << rule('-') << "\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const ShapAnalysis& a = *ranked[i];
      out << pad_left(std::to_string(i + 1), 4) << "  " << pad_right(a.target, 24) << " "
          << pad_left(fmt_fixed(a.credibility.score), 12) << "  "
          << pad_right(to_string(a.credibility.level), 6) << " " << pad_left(fmt_fixed(a.entropy), 8)
          << " " << pad_left(fmt_fixed(a.nll), 10) << " "
          << pad_left(fmt_fixed(a.shap_error, 6), 10) << "\n";
    }
    out << "\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) render_analysis(out, *ranked[i], i + 1);
  } else {
    out << "No targets could be modeled.\n\n";
  }
  if (!skipped.empty()) {
    out << "Skipped targets:\n";
    for (const TargetOutcome* o : skipped) {
      out << "  - " << o->analysis.target << ": " << o->skip_reason << "\n";
    }
    out << "\n";
  }
  out << rule('=') << "\n";
  out << "END OF REPORT\n";
  return out.str();
}

std::string report_body(const std::string& report_text) {
  std::string out;
  out.reserve(report_text.size());
  std::size_t pos = 0;
  while (pos < report_text.size()) {
    std::size_t eol = report_text.find('\n', pos);
    std::size_t end = eol == std::string::npos ? report_text.size() : eol + 1;
    std::string_view line(report_text.data() + pos, end - pos);
    if (line.rfind("Generated ", 0) != 0) out.append(line);
    pos = end;
  }
  return out;
}

json report_payload(const FeatureTable& table, const std::vector<PairwiseRelation>& relations,
                    const std::vector<TargetOutcome>& outcomes, const ReportMeta& meta) {
  json features = json::array();
  for (const Feature& f : table.features) {
    json jf{{"name", f.name},
            {"kind", f.is_discrete() ? "discrete" : "continuous"},
            {"missing_imputed", f.missing_imputed},
            {"outliers_clipped", f.outliers_clipped},
            {"description", f.description}};
    if (f.is_discrete()) {
      DiscreteStats s = discrete_summary(f);
      json freq = json::array();
      for (std::size_t i = 0; i < s.frequencies.size(); ++i) {
        freq.push_back({{"label", f.label_of(s.frequencies[i].first)},
                        {"code", s.frequencies[i].first},
                        {"count", s.frequencies[i].second},
                        {"proportion", s.proportions[i].second}});
      }
      jf["stats"] = json{{"n_categories", s.n_categories}, {"frequencies", freq}};
      json mapping = json::array();
      for (const auto& [label, code] : f.category_mapping) {
        mapping.push_back({{"label", label}, {"code", code}});
      }
      jf["category_mapping"] = mapping;
    } else {
      ContinuousStats s = continuous_summary(f.values);
      jf["stats"] = json{{"mean", s.mean},     {"median", s.median}, {"variance", s.variance},
                         {"std_dev", s.std_dev}, {"min", s.min},     {"max", s.max},
                         {"range", s.range},    {"q1", s.q1},        {"q3", s.q3},
                         {"iqr", s.iqr}};
    }
    features.push_back(std::move(jf));
  }

  json dropped = json::array();
  for (const auto& d : table.dropped) dropped.push_back({{"name", d.name}, {"reason", d.reason}});

  json rels = json::array();
  for (const auto& rel : relations) {
    if (!rel.significant) continue;
    json metrics = json::object();
    for (const auto& [name, value] : rel.metrics.values) metrics[name] = value;
    rels.push_back({{"source", rel.source},
                    {"target", rel.target},
                    {"kind", to_string(rel.kind)},
                    {"metrics", metrics},
                    {"description", rel.description}});
  }

  json analyses = json::array();
  json skipped = json::array();
  for (const auto& o : outcomes) {
    if (!o.analyzed) {
      skipped.push_back({{"target", o.analysis.target}, {"reason", o.skip_reason}});
      continue;
    }
    const ShapAnalysis& a = o.analysis;
    json cv = json::object();
    for (const auto& [label, nll] : a.cv_nll) cv[label] = nll;
    analyses.push_back({{"target", a.target},
                        {"task", a.task == TaskKind::Classification ? "classification" : "regression"},
                        {"model", a.model_label},
                        {"nll", a.nll},
                        {"cv_nll", cv},
                        {"fold_nlls", a.fold_nlls},
                        {"entropy", a.entropy},
                        {"shap_error", a.shap_error},
                        {"credibility_score", a.credibility.score},
                        {"credibility_level", to_string(a.credibility.level)},
                        {"features", a.global.features},
                        {"mean_abs_shap", a.global.mean_abs},
                        {"explained_rows", a.global.explained_rows},
                        {"per_row_shap", a.global.per_row},
                        {"interpretation", a.interpretation}});
  }

  return json{{"table_name", table.name},
              {"n_rows", table.n_rows},
              {"dataset_description", meta.dataset_description},
              {"cluster_note", meta.cluster_note},
              {"seed", meta.seed},
              {"features", features},
              {"dropped", dropped},
              {"relations", rels},
              {"analyses", analyses},
              {"skipped", skipped}};
}

namespace {

std::string sanitize_name(const std::string& name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-';
    out += ok ? c : '_';
  }
  if (out.empty()) out = "table";
  return out;
}

}  // namespace

std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& table_name,
                                 std::uint64_t content_hash) {
  return dir / (sanitize_name(table_name) + "-" + hex64(content_hash).substr(0, 12) + ".json");
}

void cache_store(const std::filesystem::path& dir, const CacheEntry& entry) {
  std::filesystem::create_directories(dir);
  json doc{{"table_name", entry.table_name},
           {"content_hash", entry.content_hash_hex},
           {"config_digest", entry.config_digest_hex},
           {"report_text", entry.report_text},
           {"payload", entry.payload}};
  std::filesystem::path final_path =
      dir / (sanitize_name(entry.table_name) + "-" + entry.content_hash_hex.substr(0, 12) + ".json");
  std::filesystem::path tmp_path = final_path;
  tmp_path += ".tmp";
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw ExplanovaError("cannot write cache file " + tmp_path.string());
    out << doc.dump(2);
    if (!out) throw ExplanovaError("failed writing cache file " + tmp_path.string());
  }
  std::filesystem::rename(tmp_path, final_path);
}

std::optional<CacheEntry> cache_load(const std::filesystem::path& dir,
                                     const std::string& table_name, std::uint64_t content_hash,
                                     const std::string& config_digest_hex) {
  std::filesystem::path path = cache_path(dir, table_name, content_hash);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc = json::parse(buffer.str(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  CacheEntry entry;
  entry.table_name = doc.value("table_name", std::string{});
  entry.content_hash_hex = doc.value("content_hash", std::string{});
  entry.config_digest_hex = doc.value("config_digest", std::string{});
  entry.report_text = doc.value("report_text", std::string{});
  entry.payload = doc.value("payload", json::object());
  if (entry.table_name != table_name) return std::nullopt;
  if (entry.content_hash_hex != hex64(content_hash)) return std::nullopt;
  if (entry.config_digest_hex != config_digest_hex) return std::nullopt;
  if (entry.report_text.empty()) return std::nullopt;
  return entry;
}

std::string answer_question(const std::string& report_text, const std::string& question,
                            const LlmClient& llm) {
  const std::size_t budget = llm.config().context_char_budget;
  json full{{"question", question}, {"payload", report_text}};
  if (LlmClient::render_prompt(PromptKind::QaChunk, full).size() <= budget) {
    return llm.chat(PromptKind::QaChunk, full);
  }

  json empty{{"question", question}, {"payload", ""}};
  std::size_t overhead = LlmClient::render_prompt(PromptKind::QaChunk, empty).size();
  if (overhead >= budget) {
    throw ExplanovaError("QA unavailable: the question alone exceeds the context budget");
  }
  const std::size_t capacity = budget - overhead;

  // pack whole lines greedily; oversized lines are hard-split so the chunk
  // concatenation always reproduces the report byte-for-byte
  std::vector<std::string> chunks;
  std::string current;
  std::size_t pos = 0;
  while (pos < report_text.size()) {
    std::size_t eol = report_text.find('\n', pos);
    std::size_t end = eol == std::string::npos ? report_text.size() : eol + 1;
    std::string_view line(report_text.data() + pos, end - pos);
    if (line.size() > capacity) {
      if (!current.empty()) {
        chunks.push_back(std::move(current));
        current.clear();
      }
      std::size_t off = 0;
      while (line.size() - off > capacity) {
        chunks.emplace_back(line.substr(off, capacity));
        off += capacity;
      }
      current.assign(line.substr(off));
    } else if (current.size() + line.size() > capacity) {
      chunks.push_back(std::move(current));
      current.assign(line);
    } else {
      current.append(line);
    }
    pos = end;
  }
  if (!current.empty()) chunks.push_back(std::move(current));

  std::vector<LlmRequest> requests;
  requests.reserve(chunks.size());
  for (const std::string& chunk : chunks) {
    requests.push_back({PromptKind::QaChunk, json{{"question", question}, {"payload", chunk}}});
  }
  std::vector<LlmOutcome> outcomes = llm.chat_batch(requests);

  std::string partials;
  std::size_t failures = 0;
  std::size_t index = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].ok) {
      ++failures;
      continue;
    }
    partials += "[" + std::to_string(++index) + "] " + outcomes[i].text + "\n";
  }
  if (index == 0) throw ExplanovaError("QA unavailable: every report chunk request failed");

  std::string answer =
      llm.chat(PromptKind::QaReduce, json{{"question", question}, {"payload", partials}});
  if (failures > 0) {
    answer += "\n(note: " + std::to_string(failures) + " of " + std::to_string(chunks.size()) +
              " report chunks could not be analyzed)";
  }
  return answer;
}

}  // namespace explanova
