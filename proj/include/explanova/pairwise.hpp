#pragma once

#include <string>
#include <utility>
#include <vector>

#include "explanova/llm.hpp"
#include "explanova/table.hpp"

namespace explanova {

enum class PairKind { ContCont, ContDisc, DiscCont, DiscDisc };

const char* to_string(PairKind kind);

// Ordered metric list; iteration order is the rendering order.
struct MetricSet {
  std::vector<std::pair<std::string, double>> values;

  void add(std::string name, double v) { values.emplace_back(std::move(name), v); }
  bool has(std::string_view name) const;
  double get(std::string_view name) const;  // throws if absent
};

struct SignificanceThresholds {
  double pearson_abs = 0.3;
  double spearman_abs = 0.3;
  double mutual_info = 0.1;   // continuous-continuous pairs
  double anova_p = 0.05;
  double eta_squared = 0.06;
  double chi2_p = 0.05;
  double cramers_v = 0.1;
};

struct PairwiseRelation {
  std::string source;
  std::string target;
  PairKind kind = PairKind::ContCont;
  MetricSet metrics;
  bool significant = false;
  std::string description;
};

// Direction (source -> target) picks the battery:
//   cont->cont: pearson_r, spearman_r, mutual_info
//   cont->disc: anova_f, anova_p, eta_squared, kruskal_h (target defines groups)
//   disc->cont: anova_f, anova_p, eta_squared, cohens_f  (source defines groups)
//   disc->disc: chi2, chi2_p, cramers_v, mutual_info
PairKind pair_kind(FeatureClass source, FeatureClass target);

MetricSet compute_pair_metrics(const Feature& source, const Feature& target);

bool classify_significance(PairKind kind, const MetricSet& metrics,
                           const SignificanceThresholds& thresholds);

// Every ordered pair of distinct features. Per-pair statistic failures
// (degenerate inputs) mark the pair non-significant instead of aborting the
// scan; significant pairs get a model-written description (with a
// deterministic fallback when the gateway fails).
std::vector<PairwiseRelation> analyze_all_pairs(const FeatureTable& table,
                                                const SignificanceThresholds& thresholds,
                                                const LlmClient& llm, std::size_t workers = 1);

}  // namespace explanova
