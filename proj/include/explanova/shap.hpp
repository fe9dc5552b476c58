#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "explanova/llm.hpp"
#include "explanova/models.hpp"

namespace explanova {

struct ShapConfig {
  std::size_t enumeration_limit = 12;  // full coalition enumeration up to this many groups
  std::size_t sample_budget = 2048;    // sampled coalitions above the limit
  std::size_t explained_row_cap = 200;
  std::size_t background_row_cap = 100;
  std::size_t perturbation_folds = 3;
  std::uint64_t seed = 42;
};

// Shapley kernel weight (m - 1) / (C(m, s) * s * (m - s)) for a coalition of
// size s out of m players; undefined (throws) for the empty and full sets.
double kernel_weight(std::size_t m, std::size_t s);

// Constrained weighted least squares over an arbitrary coalition value
// function (mask[i] = player i present). The solution satisfies local
// accuracy exactly: sum(phi) == value(full) - value(empty).
std::vector<double> kernel_shap_solve(std::size_t m,
                                      const std::function<double(const std::vector<bool>&)>& value,
                                      const ShapConfig& cfg = {});

// Attributions for one design-matrix row against a background sample, one
// value per predictor group (a one-hot block toggles as a unit). Absent
// groups take the background row's values. Classification explains the
// probability of the class the model predicts for the full row.
std::vector<double> kernel_shap_explain(const TrainedModel& model, const DesignMatrix& m,
                                        std::span<const std::size_t> background_rows,
                                        std::size_t row, const ShapConfig& cfg = {});

struct GlobalShap {
  std::vector<std::string> features;         // predictor group order
  std::vector<double> mean_abs;              // mean |attribution| per group
  std::vector<std::size_t> explained_rows;
  std::vector<std::vector<double>> per_row;  // signed attributions, row-aligned
};

// Explains up to explained_row_cap rows (seeded subsample) against up to
// background_row_cap background rows.
GlobalShap global_shap(const TrainedModel& model, const DesignMatrix& m, const ShapConfig& cfg,
                       std::size_t workers = 1);

// Stability check: for each of perturbation_folds seeded folds, drop that
// fold, refit the family, re-explain, and compare global attributions to the
// full-data ones. Returns the mean over folds of the mean absolute
// per-feature difference. Throws when a fold would leave under 10 rows.
double shap_perturbation_error(ModelFamily family, const DesignMatrix& m,
                               const std::vector<double>& full_global, const ShapConfig& cfg,
                               const ModelHyperparams& hp = {}, std::size_t workers = 1);

// Shannon entropy (nats) of the normalized absolute attribution vector; an
// all-zero vector has entropy 0.
double shap_entropy(std::span<const double> global_attributions);

enum class CredibilityLevel { High, Medium, Low };
const char* to_string(CredibilityLevel level);

struct Credibility {
  double score = 0.0;
  CredibilityLevel level = CredibilityLevel::Low;
};

// score = entropy / (max(|nll|, 1e-9) * max(|shap_error|, 1e-9));
// High at score >= 10, Medium at score >= 3, Low below.
Credibility credibility_score(double entropy, double nll, double shap_error);

struct ShapAnalysis {
  std::string target;
  TaskKind task = TaskKind::Regression;
  ModelFamily best_family = ModelFamily::Linear;
  std::string model_label;
  double nll = 0.0;  // winner's mean CV NLL
  std::vector<std::pair<std::string, double>> cv_nll;  // family label -> mean CV NLL
  std::vector<double> fold_nlls;
  GlobalShap global;
  double entropy = 0.0;
  double shap_error = 0.0;
  Credibility credibility;
  std::string interpretation;
};

struct TargetOutcome {
  bool analyzed = false;
  ShapAnalysis analysis;
  std::string skip_reason;
};

// Per-target pipeline: model selection, attribution, stability, credibility,
// interpretation. Modeling failures (degenerate target, too few rows, ...)
// turn into a skip reason rather than an exception.
TargetOutcome analyze_target(const FeatureTable& table, const std::string& target,
                             const LlmClient& llm, const ShapConfig& cfg,
                             const ModelHyperparams& hp = {}, std::size_t workers = 1);

}  // namespace explanova
