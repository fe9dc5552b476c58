#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "explanova/table.hpp"

namespace explanova {

enum class TaskKind { Classification, Regression };
enum class ModelFamily { Linear, Tree, Mlp, Ensemble };

inline constexpr ModelFamily kAllFamilies[] = {ModelFamily::Linear, ModelFamily::Tree,
                                               ModelFamily::Mlp, ModelFamily::Ensemble};

const char* to_string(ModelFamily family);
// user-facing label; the linear family reads "logistic" on classification
std::string family_label(ModelFamily family, TaskKind task);

// shared numeric floors for probabilities and predictive variances
inline constexpr double kEpsilon = 1e-6;

// columns of the design matrix contributed by one source feature
// (continuous: one min-max scaled column; discrete: one-hot block)
struct PredictorGroup {
  std::string feature;
  std::vector<std::size_t> columns;
};

struct DesignMatrix {
  TaskKind task = TaskKind::Regression;
  std::string target_name;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> x;  // row-major, all values in [0, 1]
  std::vector<double> y;  // regression targets (raw scale)
  std::vector<int> labels;  // classification targets
  std::size_t n_classes = 0;
  std::vector<PredictorGroup> groups;
  std::vector<std::string> column_names;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x.data() + i * n_cols, n_cols);
  }
};

// Target becomes y (discrete target -> classification over its codes); every
// other feature becomes a predictor group. Throws on an unknown target, a
// classification target with fewer than two observed classes, or a table
// with no predictors.
DesignMatrix build_design_matrix(const FeatureTable& table, const std::string& target);

struct Prediction {
  std::vector<double> probs;  // classification: clamped, renormalized
  double mu = 0.0;
  double sigma2 = 0.0;  // regression: floored at kEpsilon
};

struct ModelHyperparams {
  // logistic (linear family, classification)
  double logistic_lr = 0.1;
  int logistic_epochs = 500;
  double logistic_l2 = 1e-4;  // weights only, never the bias
  // ridge (linear family, regression)
  double ridge_lambda = 1e-8;
  // decision tree
  int tree_max_depth = 6;
  std::size_t tree_min_leaf = 5;
  double tree_laplace = 1.0;
  // multilayer perceptron
  std::size_t mlp_hidden = 32;
  double mlp_lr = 0.05;
  int mlp_epochs = 300;
  double mlp_init_sigma = 0.1;
};

class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  TaskKind task() const { return task_; }
  std::size_t n_classes() const { return n_classes_; }
  // raw model output postprocessed into valid probabilities / variance
  Prediction predict(std::span<const double> x) const;

 protected:
  TrainedModel(TaskKind task, std::size_t n_classes) : task_(task), n_classes_(n_classes) {}
  virtual Prediction raw_predict(std::span<const double> x) const = 0;
  TaskKind task_;
  std::size_t n_classes_;
};

// Fits one family on the given training rows (empty -> all rows). Seeds make
// every stochastic family bit-reproducible. The ensemble averages a linear,
// a tree, and an mlp member trained on the same rows.
std::unique_ptr<TrainedModel> fit_model(ModelFamily family, const DesignMatrix& m,
                                        std::span<const std::size_t> rows, std::uint64_t seed,
                                        const ModelHyperparams& hp = {});

// Single-member ensemble wrapper (degenerates to the member), for tests that
// pin the mixture rules.
std::unique_ptr<TrainedModel> make_ensemble(std::vector<std::unique_ptr<TrainedModel>> members);

// Unified scores: mean -ln p(true class) (the probability floor is predict()'s
// job), and the Gaussian NLL with per-row variance floored at kEpsilon.
double nll_classification(const std::vector<std::vector<double>>& probs,
                          const std::vector<int>& labels);
double nll_regression(const std::vector<double>& mu, const std::vector<double>& sigma2,
                      const std::vector<double>& y);
double evaluate_nll(const TrainedModel& model, const DesignMatrix& m,
                    std::span<const std::size_t> rows);

// Seeded shuffled partition into k contiguous chunks (sizes differ by at
// most one). The same (n, k, seed) triple always yields the same folds.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                    std::uint64_t seed);

struct CvResult {
  double mean_nll = 0.0;
  std::vector<double> fold_nlls;
};

// k-fold cross-validation; the fold split depends only on (n, k, seed), so
// every family scored with the same seed sees identical folds.
CvResult cross_validate(ModelFamily family, const DesignMatrix& m, std::size_t k,
                        std::uint64_t seed, const ModelHyperparams& hp = {});

struct ModelReport {
  std::string target;
  TaskKind task = TaskKind::Regression;
  ModelFamily best_family = ModelFamily::Linear;
  double best_nll = 0.0;  // mean CV NLL of the winner
  std::vector<std::pair<ModelFamily, double>> cv_nll;  // all four families
  std::vector<double> best_fold_nlls;
  std::unique_ptr<TrainedModel> model;  // winner refit on all rows
};

// 5-fold CV across all four families; ties break toward the earlier family
// in declaration order (Linear < Tree < Mlp < Ensemble).
ModelReport select_best_model(const DesignMatrix& m, std::uint64_t seed,
                              const ModelHyperparams& hp = {}, std::size_t workers = 1);

// MLP internals, exposed so the analytic gradient can be checked against
// central differences.
struct MlpSpec {
  std::size_t n_in = 0;
  std::size_t n_hidden = 32;
  std::size_t n_out = 1;
  TaskKind task = TaskKind::Regression;
};

std::size_t mlp_param_count(const MlpSpec& spec);
std::vector<double> mlp_init_params(const MlpSpec& spec, std::uint64_t seed, double sigma);
// Mean training loss (cross-entropy / half squared error) over `rows`;
// writes the full gradient when `grad` is non-null.
double mlp_loss_and_gradient(const MlpSpec& spec, std::span<const double> params,
                             const DesignMatrix& m, std::span<const std::size_t> rows,
                             std::vector<double>* grad);

}  // namespace explanova
