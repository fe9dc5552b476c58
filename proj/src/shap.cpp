#include "explanova/shap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "explanova/util.hpp"

namespace explanova {

double kernel_weight(std::size_t m, std::size_t s) {
  if (m < 2) throw ExplanovaError("kernel_weight: need at least 2 players");
  if (s == 0 || s >= m) throw ExplanovaError("kernel_weight: undefined for empty or full coalition");
  double binom = 1.0;
  for (std::size_t i = 1; i <= s; ++i) {
    binom *= static_cast<double>(m - s + i) / static_cast<double>(i);
  }
  return static_cast<double>(m - 1) /
         (binom * static_cast<double>(s) * static_cast<double>(m - s));
}

std::vector<double> kernel_shap_solve(std::size_t m,
                                      const std::function<double(const std::vector<bool>&)>& value,
                                      const ShapConfig& cfg) {
  if (m == 0) throw ExplanovaError("kernel_shap_solve: no players");
  std::vector<bool> none(m, false), all(m, true);
  double v0 = value(none);
  double delta = value(all) - v0;
  if (m == 1) return {delta};

  // weighted coalition list: exhaustive when tractable, kernel-distributed
  // sampling otherwise (the kernel becomes the sampling law, so sampled
  // coalitions are weighted by their draw counts)
  std::vector<std::pair<std::vector<bool>, double>> coalitions;
  if (m <= cfg.enumeration_limit) {
    std::uint64_t total = (1ull << m) - 1;
    for (std::uint64_t mask = 1; mask < total; ++mask) {
      std::vector<bool> z(m, false);
      std::size_t s = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (mask & (1ull << j)) {
          z[j] = true;
          ++s;
        }
      }
      coalitions.emplace_back(std::move(z), kernel_weight(m, s));
    }
  } else {
    // size law: total kernel mass of size s is (m-1) / (s * (m-s))
    std::vector<double> cumulative(m - 1, 0.0);
    double acc = 0.0;
    for (std::size_t s = 1; s < m; ++s) {
      acc += 1.0 / (static_cast<double>(s) * static_cast<double>(m - s));
      cumulative[s - 1] = acc;
    }
    Rng rng(mix_seed(cfg.seed, "shap-coalitions"));
    std::map<std::vector<bool>, double> counts;
    std::vector<std::size_t> indices(m);
    for (std::size_t draw = 0; draw < cfg.sample_budget; ++draw) {
      double u = rng.uniform01() * acc;
      std::size_t s = 1;
      while (s < m - 1 && u > cumulative[s - 1]) ++s;
      std::iota(indices.begin(), indices.end(), std::size_t{0});
      // partial Fisher-Yates: the first s entries become the coalition
      for (std::size_t i = 0; i < s; ++i) {
        std::size_t j = i + rng.uniform_index(m - i);
        std::swap(indices[i], indices[j]);
      }
      std::vector<bool> z(m, false);
      for (std::size_t i = 0; i < s; ++i) z[indices[i]] = true;
      counts[z] += 1.0;
    }
    coalitions.assign(counts.begin(), counts.end());
  }

  // eliminate phi_{m-1} via the local-accuracy constraint and solve the
  // weighted normal equations for the remaining m-1 attributions
  std::size_t dim = m - 1;
  std::vector<double> a(dim * dim, 0.0), b(dim, 0.0), g(dim, 0.0);
  for (const auto& [z, w] : coalitions) {
    double zm = z[m - 1] ? 1.0 : 0.0;
    double y = value(z) - v0 - zm * delta;
    for (std::size_t j = 0; j < dim; ++j) g[j] = (z[j] ? 1.0 : 0.0) - zm;
    for (std::size_t p = 0; p < dim; ++p) {
      if (g[p] == 0.0) continue;
      for (std::size_t q = 0; q < dim; ++q) {
        if (g[q] != 0.0) a[p * dim + q] += w * g[p] * g[q];
      }
      b[p] += w * y * g[p];
    }
  }
  std::vector<double> u;
  try {
    u = solve_linear_system(a, b);
  } catch (const ExplanovaError&) {
    // under-determined sample: fall back to a ridge-stabilized solve
    for (std::size_t p = 0; p < dim; ++p) a[p * dim + p] += 1e-10;
    u = solve_linear_system(std::move(a), std::move(b));
  }
  std::vector<double> phi(m, 0.0);
  double partial = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    phi[j] = u[j];
    partial += u[j];
  }
  phi[m - 1] = delta - partial;
  return phi;
}

std::vector<double> kernel_shap_explain(const TrainedModel& model, const DesignMatrix& m,
                                        std::span<const std::size_t> background_rows,
                                        std::size_t row, const ShapConfig& cfg) {
  if (background_rows.empty()) throw ExplanovaError("kernel_shap_explain: empty background");
  counters().shap_explanations++;
  std::size_t groups = m.groups.size();
  std::vector<double> x(m.row(row).begin(), m.row(row).end());

  int explained_class = -1;
  if (model.task() == TaskKind::Classification) {
    Prediction p = model.predict(x);
    explained_class = static_cast<int>(
        std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  }

  std::vector<double> hybrid(m.n_cols);
  auto value = [&](const std::vector<bool>& mask) {
    double acc = 0.0;
    for (std::size_t b : background_rows) {
      std::copy(x.begin(), x.end(), hybrid.begin());
      const double* brow = m.x.data() + b * m.n_cols;
      for (std::size_t gidx = 0; gidx < groups; ++gidx) {
        if (mask[gidx]) continue;
        for (std::size_t col : m.groups[gidx].columns) hybrid[col] = brow[col];
      }
      Prediction p = model.predict(hybrid);
      acc += explained_class >= 0 ? p.probs[explained_class] : p.mu;
    }
    return acc / static_cast<double>(background_rows.size());
  };
  return kernel_shap_solve(groups, value, cfg);
}

namespace {

// Shared by the full pass and the perturbation folds: explain a (possibly
// capped) subsample of `candidates` against a background drawn from the same
// pool, and average absolute attributions per group.
GlobalShap global_shap_over(const TrainedModel& model, const DesignMatrix& m,
                            std::span<const std::size_t> candidates, const ShapConfig& cfg,
                            std::size_t workers, std::string_view salt) {
  GlobalShap out;
  for (const auto& g : m.groups) out.features.push_back(g.feature);
  std::size_t pool = candidates.size();
  if (pool == 0) throw ExplanovaError("global_shap: no rows to explain");

  auto subsample = [&](std::size_t cap, std::string_view what) {
    std::vector<std::size_t> rows;
    if (pool <= cap) {
      rows.assign(candidates.begin(), candidates.end());
      return rows;
    }
    std::vector<std::size_t> picks =
        sample_without_replacement(pool, cap, mix_seed(cfg.seed, std::string(salt) + "-" + std::string(what)));
    rows.reserve(cap);
    for (std::size_t p : picks) rows.push_back(candidates[p]);
    return rows;
  };
  out.explained_rows = subsample(cfg.explained_row_cap, "explained");
  std::vector<std::size_t> background = subsample(cfg.background_row_cap, "background");

  out.per_row.assign(out.explained_rows.size(), std::vector<double>{});
  parallel_for(out.explained_rows.size(), workers, [&](std::size_t i) {
    out.per_row[i] = kernel_shap_explain(model, m, background, out.explained_rows[i], cfg);
  });
  out.mean_abs.assign(m.groups.size(), 0.0);
  for (const auto& row : out.per_row) {
    for (std::size_t j = 0; j < row.size(); ++j) out.mean_abs[j] += std::abs(row[j]);
  }
  for (double& v : out.mean_abs) v /= static_cast<double>(out.per_row.size());
  return out;
}

}  // namespace

GlobalShap global_shap(const TrainedModel& model, const DesignMatrix& m, const ShapConfig& cfg,
                       std::size_t workers) {
  std::vector<std::size_t> all(m.n_rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return global_shap_over(model, m, all, cfg, workers, "full");
}

double shap_perturbation_error(ModelFamily family, const DesignMatrix& m,
                               const std::vector<double>& full_global, const ShapConfig& cfg,
                               const ModelHyperparams& hp, std::size_t workers) {
  if (full_global.size() != m.groups.size()) {
    throw ExplanovaError("shap_perturbation_error: attribution size mismatch");
  }
  std::size_t k = cfg.perturbation_folds;
  auto folds = kfold_indices(m.n_rows, k, mix_seed(cfg.seed, "perturb-folds"));
  std::vector<bool> held(m.n_rows, false);
  double total = 0.0;
  for (std::size_t f = 0; f < k; ++f) {
    std::fill(held.begin(), held.end(), false);
    for (std::size_t i : folds[f]) held[i] = true;
    std::vector<std::size_t> keep;
    keep.reserve(m.n_rows - folds[f].size());
    for (std::size_t i = 0; i < m.n_rows; ++i) {
      if (!held[i]) keep.push_back(i);
    }
    if (keep.size() < 10) throw ExplanovaError("table too small for perturbation analysis");
    auto model = fit_model(family, m, keep, mix_seed(cfg.seed, "perturb-fit", f), hp);
    GlobalShap g = global_shap_over(*model, m, keep, cfg, workers,
                                    "fold" + std::to_string(f));
    double diff = 0.0;
    for (std::size_t j = 0; j < full_global.size(); ++j) {
      diff += std::abs(g.mean_abs[j] - full_global[j]);
    }
    total += diff / static_cast<double>(full_global.size());
  }
  return total / static_cast<double>(k);
}

double shap_entropy(std::span<const double> global_attributions) {
  double sum = 0.0;
  for (double v : global_attributions) sum += std::abs(v);
  if (sum <= 0.0) return 0.0;
  double h = 0.0;
  for (double v : global_attributions) {
    double p = std::abs(v) / sum;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

const char* to_string(CredibilityLevel level) {
  switch (level) {
    case CredibilityLevel::High: return "HIGH";
    case CredibilityLevel::Medium: return "MEDIUM";
    case CredibilityLevel::Low: return "LOW";
  }
  return "UNKNOWN";
}

Credibility credibility_score(double entropy, double nll, double shap_error) {
  constexpr double kDelta = 1e-9;
  Credibility c;
  c.score = entropy / (std::max(std::abs(nll), kDelta) * std::max(std::abs(shap_error), kDelta));
  if (c.score >= 10.0) {
    c.level = CredibilityLevel::High;
  } else if (c.score >= 3.0) {
    c.level = CredibilityLevel::Medium;
  } else {
    c.level = CredibilityLevel::Low;
  }
  return c;
}

namespace {

json interpretation_context(const ShapAnalysis& a) {
  std::vector<std::pair<std::string, double>> ranked;
  for (std::size_t j = 0; j < a.global.features.size(); ++j) {
    ranked.emplace_back(a.global.features[j], a.global.mean_abs[j]);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  json top = json::array();
  for (std::size_t j = 0; j < ranked.size() && j < 5; ++j) {
    top.push_back({{"feature", ranked[j].first}, {"attribution", ranked[j].second}});
  }
  return json{{"target", a.target},
              {"model", a.model_label},
              {"top_features", top},
              {"entropy", a.entropy},
              {"shap_error", a.shap_error},
              {"nll", a.nll},
              {"score", a.credibility.score},
              {"level", to_string(a.credibility.level)}};
}

}  // namespace

TargetOutcome analyze_target(const FeatureTable& table, const std::string& target,
                             const LlmClient& llm, const ShapConfig& cfg,
                             const ModelHyperparams& hp, std::size_t workers) {
  TargetOutcome out;
  out.analysis.target = target;
  try {
    DesignMatrix matrix = build_design_matrix(table, target);
    ShapConfig tcfg = cfg;
    tcfg.seed = mix_seed(cfg.seed, "target", fnv1a64(target));
    ModelReport report = select_best_model(matrix, tcfg.seed, hp, workers);

    ShapAnalysis& a = out.analysis;
    a.task = matrix.task;
    a.best_family = report.best_family;
    a.model_label = family_label(report.best_family, matrix.task);
    a.nll = report.best_nll;
    for (const auto& [family, nll] : report.cv_nll) {
      a.cv_nll.emplace_back(family_label(family, matrix.task), nll);
    }
    a.fold_nlls = report.best_fold_nlls;
    a.global = global_shap(*report.model, matrix, tcfg, workers);
    a.entropy = shap_entropy(a.global.mean_abs);
    a.shap_error =
        shap_perturbation_error(report.best_family, matrix, a.global.mean_abs, tcfg, hp, workers);
    a.credibility = credibility_score(a.entropy, a.nll, a.shap_error);
    try {
      a.interpretation = llm.chat(PromptKind::ShapInterpretation, interpretation_context(a));
    } catch (const ExplanovaError&) {
      a.interpretation = "(interpretation unavailable)";
    }
    out.analyzed = true;
  } catch (const ExplanovaError& e) {
    out.skip_reason = e.what();
  }
  return out;
}

}  // namespace explanova
