#include "explanova/pairwise.hpp"

#include <algorithm>

#include "explanova/stats.hpp"
#include "explanova/util.hpp"

namespace explanova {

const char* to_string(PairKind kind) {
  switch (kind) {
    case PairKind::ContCont: return "continuous-continuous";
    case PairKind::ContDisc: return "continuous-discrete";
    case PairKind::DiscCont: return "discrete-continuous";
    case PairKind::DiscDisc: return "discrete-discrete";
  }
  return "unknown";
}

bool MetricSet::has(std::string_view name) const {
  for (const auto& [k, v] : values)
    if (k == name) return true;
  return false;
}

double MetricSet::get(std::string_view name) const {
  for (const auto& [k, v] : values)
    if (k == name) return v;
  throw ExplanovaError("metric '" + std::string(name) + "' not computed for this pair");
}

PairKind pair_kind(FeatureClass source, FeatureClass target) {
  if (source == FeatureClass::Continuous) {
    return target == FeatureClass::Continuous ? PairKind::ContCont : PairKind::ContDisc;
  }
  return target == FeatureClass::Continuous ? PairKind::DiscCont : PairKind::DiscDisc;
}

MetricSet compute_pair_metrics(const Feature& source, const Feature& target) {
  if (source.values.size() != target.values.size()) {
    throw ExplanovaError("compute_pair_metrics: column length mismatch");
  }
  MetricSet m;
  std::span<const double> x(source.values);
  std::span<const double> y(target.values);
  switch (pair_kind(source.kind, target.kind)) {
    case PairKind::ContCont: {
      m.add("pearson_r", pearson(x, y));
      m.add("spearman_r", spearman(x, y));
      m.add("mutual_info", mutual_information(x, y, false, false));
      break;
    }
    case PairKind::ContDisc: {
      std::vector<int> groups = target.codes();
      AnovaResult a = anova_oneway(x, groups);
      m.add("anova_f", a.f);
      m.add("anova_p", a.p);
      m.add("eta_squared", a.eta_squared);
      m.add("kruskal_h", kruskal_wallis(x, groups));
      break;
    }
    case PairKind::DiscCont: {
      std::vector<int> groups = source.codes();
      AnovaResult a = anova_oneway(y, groups);
      m.add("anova_f", a.f);
      m.add("anova_p", a.p);
      m.add("eta_squared", a.eta_squared);
      m.add("cohens_f", cohens_f(a.eta_squared));
      break;
    }
    case PairKind::DiscDisc: {
      std::vector<int> xc = source.codes();
      std::vector<int> yc = target.codes();
      Chi2Result c = chi2_independence(xc, yc);
      m.add("chi2", c.chi2);
      m.add("chi2_p", c.p);
      m.add("cramers_v", c.cramers_v);
      m.add("mutual_info", mutual_information(x, y, true, true));
      break;
    }
  }
  return m;
}

bool classify_significance(PairKind kind, const MetricSet& metrics,
                           const SignificanceThresholds& t) {
  switch (kind) {
    case PairKind::ContCont:
      return std::abs(metrics.get("pearson_r")) >= t.pearson_abs ||
             std::abs(metrics.get("spearman_r")) >= t.spearman_abs ||
             metrics.get("mutual_info") >= t.mutual_info;
    case PairKind::ContDisc:
    case PairKind::DiscCont:
      return metrics.get("anova_p") < t.anova_p && metrics.get("eta_squared") >= t.eta_squared;
    case PairKind::DiscDisc:
      return metrics.get("chi2_p") < t.chi2_p && metrics.get("cramers_v") >= t.cramers_v;
  }
  return false;
}

namespace {

json relation_context(const PairwiseRelation& rel) {
  json metrics = json::object();
  for (const auto& [name, value] : rel.metrics.values) metrics[name] = value;
  return json{{"source", rel.source},
              {"target", rel.target},
              {"kind", to_string(rel.kind)},
              {"metrics", metrics}};
}

std::string fallback_description(const PairwiseRelation& rel) {
  std::string parts;
  for (const auto& [name, value] : rel.metrics.values) {
    if (!parts.empty()) parts += ", ";
    parts += name + "=" + fmt_fixed(value);
  }
  return "Significant " + std::string(to_string(rel.kind)) + " relationship between '" +
         rel.source + "' and '" + rel.target + "' (" + parts + ").";
}

}  // namespace

std::vector<PairwiseRelation> analyze_all_pairs(const FeatureTable& table,
                                                const SignificanceThresholds& thresholds,
                                                const LlmClient& llm, std::size_t workers) {
  const auto& feats = table.features;
  std::size_t m = feats.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(m * (m - 1));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  std::vector<PairwiseRelation> relations(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t p) {
    const Feature& src = feats[pairs[p].first];
    const Feature& dst = feats[pairs[p].second];
    PairwiseRelation& rel = relations[p];
    rel.source = src.name;
    rel.target = dst.name;
    rel.kind = pair_kind(src.kind, dst.kind);
    counters().pair_metrics++;
    try {
      rel.metrics = compute_pair_metrics(src, dst);
      rel.significant = classify_significance(rel.kind, rel.metrics, thresholds);
    } catch (const ExplanovaError&) {
      // degenerate pair (constant column, single category, ...): keep it,
      // just never significant
      rel.significant = false;
    }
  });

  // describe significant pairs in one bounded-concurrency batch
  std::vector<std::size_t> described;
  std::vector<LlmRequest> requests;
  for (std::size_t p = 0; p < relations.size(); ++p) {
    if (!relations[p].significant) continue;
    described.push_back(p);
    requests.push_back({PromptKind::RelationDescription, relation_context(relations[p])});
  }
  if (!requests.empty()) {
    std::vector<LlmOutcome> outcomes = llm.chat_batch(requests);
    for (std::size_t k = 0; k < described.size(); ++k) {
      PairwiseRelation& rel = relations[described[k]];
      rel.description = outcomes[k].ok ? outcomes[k].text : fallback_description(rel);
    }
  }
  return relations;
}

}  // namespace explanova
