#include "explanova/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "explanova/stats.hpp"
#include "explanova/util.hpp"

namespace explanova {

const char* to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::Linear: return "linear";
    case ModelFamily::Tree: return "tree";
    case ModelFamily::Mlp: return "mlp";
    case ModelFamily::Ensemble: return "ensemble";
  }
  return "unknown";
}

std::string family_label(ModelFamily family, TaskKind task) {
  if (family == ModelFamily::Linear && task == TaskKind::Classification) return "logistic";
  return to_string(family);
}

DesignMatrix build_design_matrix(const FeatureTable& table, const std::string& target) {
  const Feature* tf = table.find(target);
  if (!tf) throw ExplanovaError("unknown target feature '" + target + "'");
  DesignMatrix m;
  m.target_name = target;
  m.n_rows = table.n_rows;
  if (tf->is_discrete()) {
    m.task = TaskKind::Classification;
    m.labels = tf->codes();
    std::set<int> observed(m.labels.begin(), m.labels.end());
    if (observed.size() < 2) {
      throw ExplanovaError("degenerate target '" + target + "': fewer than two observed classes");
    }
    m.n_classes = tf->category_count();
  } else {
    m.task = TaskKind::Regression;
    m.y = tf->values;
  }

  struct ColSpec {
    const Feature* f;
    bool one_hot;
    int code;
    double min;
    double range;
  };
  std::vector<ColSpec> spec;
  for (const Feature& f : table.features) {
    if (f.name == target) continue;
    PredictorGroup group;
    group.feature = f.name;
    if (f.is_discrete()) {
      for (std::size_t c = 0; c < f.category_count(); ++c) {
        group.columns.push_back(spec.size());
        spec.push_back({&f, true, static_cast<int>(c), 0.0, 0.0});
        m.column_names.push_back(f.name + "=" + f.label_of(static_cast<int>(c)));
      }
    } else {
      auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
      group.columns.push_back(spec.size());
      spec.push_back({&f, false, 0, *lo, *hi - *lo});
      m.column_names.push_back(f.name);
    }
    m.groups.push_back(std::move(group));
  }
  if (m.groups.empty()) throw ExplanovaError("no predictor features for target '" + target + "'");

  m.n_cols = spec.size();
  m.x.assign(m.n_rows * m.n_cols, 0.0);
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    double* row = m.x.data() + i * m.n_cols;
    for (std::size_t j = 0; j < spec.size(); ++j) {
      const ColSpec& s = spec[j];
      double v = s.f->values[i];
      if (s.one_hot) {
        row[j] = static_cast<int>(v) == s.code ? 1.0 : 0.0;
      } else {
        row[j] = s.range > 0.0 ? (v - s.min) / s.range : 0.0;
      }
    }
  }
  return m;
}

namespace {

std::span<const std::size_t> resolve_rows(std::span<const std::size_t> rows,
                                          std::vector<std::size_t>& storage, std::size_t n) {
  if (!rows.empty()) return rows;
  storage.resize(n);
  std::iota(storage.begin(), storage.end(), std::size_t{0});
  return storage;
}

void softmax_inplace(std::vector<double>& z) {
  double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

Prediction TrainedModel::predict(std::span<const double> x) const {
  Prediction p = raw_predict(x);
  if (task_ == TaskKind::Classification) {
    double sum = 0.0;
    for (double& v : p.probs) {
      v = std::clamp(v, kEpsilon, 1.0 - kEpsilon);
      sum += v;
    }
    for (double& v : p.probs) v /= sum;
  } else {
    p.sigma2 = std::max(p.sigma2, kEpsilon);
  }
  return p;
}

namespace {

// -------------------------------------------------------------- logistic ---

class LogisticModel final : public TrainedModel {
 public:
  LogisticModel(const DesignMatrix& m, std::span<const std::size_t> rows,
                const ModelHyperparams& hp)
      : TrainedModel(TaskKind::Classification, m.n_classes), d_(m.n_cols), c_(m.n_classes) {
    std::vector<std::size_t> storage;
    rows = resolve_rows(rows, storage, m.n_rows);
    w_.assign(d_ * c_, 0.0);
    b_.assign(c_, 0.0);
    double n = static_cast<double>(rows.size());
    std::vector<double> gw(w_.size()), gb(c_), z(c_);
    for (int epoch = 0; epoch < hp.logistic_epochs; ++epoch) {
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t i : rows) {
        std::span<const double> x = m.row(i);
        for (std::size_t c = 0; c < c_; ++c) z[c] = b_[c];
        for (std::size_t j = 0; j < d_; ++j) {
          double xv = x[j];
          if (xv == 0.0) continue;
          const double* wj = w_.data() + j * c_;
          for (std::size_t c = 0; c < c_; ++c) z[c] += xv * wj[c];
        }
        softmax_inplace(z);
        z[m.labels[i]] -= 1.0;  // residual p - onehot(y)
        for (std::size_t j = 0; j < d_; ++j) {
          double xv = x[j];
          if (xv == 0.0) continue;
          double* gwj = gw.data() + j * c_;
          for (std::size_t c = 0; c < c_; ++c) gwj[c] += xv * z[c];
        }
        for (std::size_t c = 0; c < c_; ++c) gb[c] += z[c];
      }
      for (std::size_t k = 0; k < w_.size(); ++k) {
        w_[k] -= hp.logistic_lr * (gw[k] / n + hp.logistic_l2 * w_[k]);
      }
      for (std::size_t c = 0; c < c_; ++c) b_[c] -= hp.logistic_lr * gb[c] / n;
    }
  }

 protected:
  Prediction raw_predict(std::span<const double> x) const override {
    Prediction p;
    std::vector<double> z(c_);
    for (std::size_t c = 0; c < c_; ++c) z[c] = b_[c];
    for (std::size_t j = 0; j < d_; ++j) {
      double xv = x[j];
      if (xv == 0.0) continue;
      const double* wj = w_.data() + j * c_;
      for (std::size_t c = 0; c < c_; ++c) z[c] += xv * wj[c];
    }
    softmax_inplace(z);
    p.probs = std::move(z);
    return p;
  }

 private:
  std::size_t d_, c_;
  std::vector<double> w_;  // d x C
  std::vector<double> b_;
};

// ------------------------------------------------------- ridge regression ---

class LinearRegressionModel final : public TrainedModel {
 public:
  LinearRegressionModel(const DesignMatrix& m, std::span<const std::size_t> rows,
                        const ModelHyperparams& hp)
      : TrainedModel(TaskKind::Regression, 0), d_(m.n_cols) {
    std::vector<std::size_t> storage;
    rows = resolve_rows(rows, storage, m.n_rows);
    std::size_t dim = d_ + 1;  // trailing bias column
    std::vector<double> a(dim * dim, 0.0), rhs(dim, 0.0), z(dim, 1.0);
    for (std::size_t i : rows) {
      std::span<const double> x = m.row(i);
      for (std::size_t j = 0; j < d_; ++j) z[j] = x[j];
      for (std::size_t p = 0; p < dim; ++p) {
        for (std::size_t q = 0; q < dim; ++q) a[p * dim + q] += z[p] * z[q];
        rhs[p] += z[p] * m.y[i];
      }
    }
    for (std::size_t j = 0; j < d_; ++j) a[j * dim + j] += hp.ridge_lambda;  // bias unpenalized
    w_ = solve_linear_system(std::move(a), std::move(rhs));
    double sse = 0.0;
    for (std::size_t i : rows) {
      double diff = value_at(m.row(i)) - m.y[i];
      sse += diff * diff;
    }
    residual_var_ = std::max(kEpsilon, sse / static_cast<double>(rows.size()));
  }

 protected:
  Prediction raw_predict(std::span<const double> x) const override {
    Prediction p;
    p.mu = value_at(x);
    p.sigma2 = residual_var_;
    return p;
  }

 private:
  double value_at(std::span<const double> x) const {
    double v = w_[d_];
    for (std::size_t j = 0; j < d_; ++j) v += w_[j] * x[j];
    return v;
  }

  std::size_t d_;
  std::vector<double> w_;  // d weights + bias
  double residual_var_ = kEpsilon;
};

// ----------------------------------------------------------------- tree ---

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> probs;
  double mu = 0.0;
  double var = 0.0;
};

class TreeModel final : public TrainedModel {
 public:
  TreeModel(const DesignMatrix& m, std::span<const std::size_t> rows, const ModelHyperparams& hp)
      : TrainedModel(m.task, m.n_classes) {
    std::vector<std::size_t> storage;
    rows = resolve_rows(rows, storage, m.n_rows);
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    build(m, hp, idx, 0);
    if (task_ == TaskKind::Regression) {
      double sse = 0.0;
      for (std::size_t i : rows) {
        double diff = leaf_at(m.row(i)).mu - m.y[i];
        sse += diff * diff;
      }
      residual_var_ = std::max(kEpsilon, sse / static_cast<double>(rows.size()));
    }
  }

 protected:
  Prediction raw_predict(std::span<const double> x) const override {
    const TreeNode& leaf = leaf_at(x);
    Prediction p;
    if (task_ == TaskKind::Classification) {
      p.probs = leaf.probs;
    } else {
      p.mu = leaf.mu;
      p.sigma2 = std::max(leaf.var, residual_var_);
    }
    return p;
  }

 private:
  const TreeNode& leaf_at(std::span<const double> x) const {
    int cur = 0;
    while (nodes_[cur].feature >= 0) {
      cur = x[nodes_[cur].feature] <= nodes_[cur].threshold ? nodes_[cur].left : nodes_[cur].right;
    }
    return nodes_[cur];
  }

  int build(const DesignMatrix& m, const ModelHyperparams& hp, std::vector<std::size_t>& rows,
            int depth) {
    int self = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double n = static_cast<double>(rows.size());
    bool pure = false;
    if (task_ == TaskKind::Classification) {
      std::vector<double> counts(n_classes_, 0.0);
      for (std::size_t i : rows) counts[m.labels[i]] += 1.0;
      std::vector<double>& probs = nodes_[self].probs;
      probs.resize(n_classes_);
      for (std::size_t c = 0; c < n_classes_; ++c) {
        probs[c] = (counts[c] + hp.tree_laplace) /
                   (n + hp.tree_laplace * static_cast<double>(n_classes_));
      }
      pure = std::any_of(counts.begin(), counts.end(), [&](double c) { return c == n; });
    } else {
      double sum = 0.0, sumsq = 0.0;
      for (std::size_t i : rows) {
        sum += m.y[i];
        sumsq += m.y[i] * m.y[i];
      }
      double mu = sum / n;
      nodes_[self].mu = mu;
      double sse = std::max(0.0, sumsq - sum * sum / n);
      nodes_[self].var = rows.size() > 1 ? sse / (n - 1.0) : 0.0;
      pure = sse <= 0.0;
    }
    if (depth >= hp.tree_max_depth || rows.size() < 2 * hp.tree_min_leaf || pure) return self;

    // exhaustive split search; impure nodes accept zero-gain splits so that
    // parity-style patterns still separate at depth 2
    double best_gain = -std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, std::size_t>> order(rows.size());
    for (std::size_t j = 0; j < m.n_cols; ++j) {
      for (std::size_t k = 0; k < rows.size(); ++k) {
        order[k] = {m.x[rows[k] * m.n_cols + j], rows[k]};
      }
      std::sort(order.begin(), order.end());
      if (task_ == TaskKind::Classification) {
        std::vector<double> left_counts(n_classes_, 0.0), total_counts(n_classes_, 0.0);
        for (const auto& [v, i] : order) total_counts[m.labels[i]] += 1.0;
        auto gini = [](const std::vector<double>& counts, double cnt) {
          double g = 1.0;
          for (double c : counts) g -= (c / cnt) * (c / cnt);
          return g;
        };
        double parent = gini(total_counts, n);
        std::vector<double> right_counts = total_counts;
        for (std::size_t p = 1; p < order.size(); ++p) {
          int lbl = m.labels[order[p - 1].second];
          left_counts[lbl] += 1.0;
          right_counts[lbl] -= 1.0;
          if (order[p - 1].first == order[p].first) continue;
          double nl = static_cast<double>(p);
          double nr = n - nl;
          if (p < hp.tree_min_leaf || order.size() - p < hp.tree_min_leaf) continue;
          double gain = parent - (nl / n) * gini(left_counts, nl) - (nr / n) * gini(right_counts, nr);
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(j);
            best_threshold = (order[p - 1].first + order[p].first) / 2.0;
          }
        }
      } else {
        double total_sum = 0.0, total_sumsq = 0.0;
        for (const auto& [v, i] : order) {
          total_sum += m.y[i];
          total_sumsq += m.y[i] * m.y[i];
        }
        auto sse_of = [](double sum, double sumsq, double cnt) {
          return std::max(0.0, sumsq - sum * sum / cnt);
        };
        double parent = sse_of(total_sum, total_sumsq, n);
        double left_sum = 0.0, left_sumsq = 0.0;
        for (std::size_t p = 1; p < order.size(); ++p) {
          double yv = m.y[order[p - 1].second];
          left_sum += yv;
          left_sumsq += yv * yv;
          if (order[p - 1].first == order[p].first) continue;
          if (p < hp.tree_min_leaf || order.size() - p < hp.tree_min_leaf) continue;
          double nl = static_cast<double>(p);
          double nr = n - nl;
          double gain = parent - sse_of(left_sum, left_sumsq, nl) -
                        sse_of(total_sum - left_sum, total_sumsq - left_sumsq, nr);
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(j);
            best_threshold = (order[p - 1].first + order[p].first) / 2.0;
          }
        }
      }
    }
    if (best_feature < 0) return self;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t i : rows) {
      if (m.x[i * m.n_cols + best_feature] <= best_threshold) {
        left_rows.push_back(i);
      } else {
        right_rows.push_back(i);
      }
    }
    int left = build(m, hp, left_rows, depth + 1);
    int right = build(m, hp, right_rows, depth + 1);
    nodes_[self].feature = best_feature;
    nodes_[self].threshold = best_threshold;
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  std::vector<TreeNode> nodes_;
  double residual_var_ = kEpsilon;
};

// ------------------------------------------------------------------ mlp ---

struct MlpOffsets {
  std::size_t w1, b1, w2, b2;
};

MlpOffsets mlp_offsets(const MlpSpec& s) {
  MlpOffsets o;
  o.w1 = 0;
  o.b1 = s.n_in * s.n_hidden;
  o.w2 = o.b1 + s.n_hidden;
  o.b2 = o.w2 + s.n_hidden * s.n_out;
  return o;
}

class MlpModel final : public TrainedModel {
 public:
  MlpModel(const DesignMatrix& m, std::span<const std::size_t> rows, std::uint64_t seed,
           const ModelHyperparams& hp)
      : TrainedModel(m.task, m.n_classes) {
    spec_.n_in = m.n_cols;
    spec_.n_hidden = hp.mlp_hidden;
    spec_.n_out = m.task == TaskKind::Classification ? m.n_classes : 1;
    spec_.task = m.task;
    std::vector<std::size_t> storage;
    rows = resolve_rows(rows, storage, m.n_rows);
    params_ = mlp_init_params(spec_, seed, hp.mlp_init_sigma);
    std::vector<double> grad;
    for (int epoch = 0; epoch < hp.mlp_epochs; ++epoch) {
      mlp_loss_and_gradient(spec_, params_, m, rows, &grad);
      for (std::size_t k = 0; k < params_.size(); ++k) params_[k] -= hp.mlp_lr * grad[k];
    }
    if (task_ == TaskKind::Regression) {
      // training loss is mean half squared error, so MSE is twice that
      double loss = mlp_loss_and_gradient(spec_, params_, m, rows, nullptr);
      residual_var_ = std::max(kEpsilon, 2.0 * loss);
    }
  }

 protected:
  Prediction raw_predict(std::span<const double> x) const override {
    MlpOffsets o = mlp_offsets(spec_);
    std::vector<double> a(spec_.n_hidden), z(spec_.n_out);
    for (std::size_t j = 0; j < spec_.n_hidden; ++j) {
      double s = params_[o.b1 + j];
      for (std::size_t i = 0; i < spec_.n_in; ++i) {
        s += x[i] * params_[o.w1 + i * spec_.n_hidden + j];
      }
      a[j] = std::tanh(s);
    }
    for (std::size_t c = 0; c < spec_.n_out; ++c) {
      double s = params_[o.b2 + c];
      for (std::size_t j = 0; j < spec_.n_hidden; ++j) {
        s += a[j] * params_[o.w2 + j * spec_.n_out + c];
      }
      z[c] = s;
    }
    Prediction p;
    if (task_ == TaskKind::Classification) {
      softmax_inplace(z);
      p.probs = std::move(z);
    } else {
      p.mu = z[0];
      p.sigma2 = residual_var_;
    }
    return p;
  }

 private:
  MlpSpec spec_;
  std::vector<double> params_;
  double residual_var_ = kEpsilon;
};

// ------------------------------------------------------------- ensemble ---

class EnsembleModel final : public TrainedModel {
 public:
  explicit EnsembleModel(std::vector<std::unique_ptr<TrainedModel>> members)
      : TrainedModel(members.at(0)->task(), members.at(0)->n_classes()),
        members_(std::move(members)) {}

 protected:
  Prediction raw_predict(std::span<const double> x) const override {
    Prediction out;
    double k = static_cast<double>(members_.size());
    if (task_ == TaskKind::Classification) {
      out.probs.assign(n_classes_, 0.0);
      for (const auto& member : members_) {
        Prediction p = member->predict(x);
        for (std::size_t c = 0; c < n_classes_; ++c) out.probs[c] += p.probs[c] / k;
      }
    } else {
      std::vector<double> mus;
      mus.reserve(members_.size());
      double var_sum = 0.0;
      for (const auto& member : members_) {
        Prediction p = member->predict(x);
        mus.push_back(p.mu);
        var_sum += p.sigma2;
      }
      double mu = 0.0;
      for (double v : mus) mu += v;
      mu /= k;
      double spread = 0.0;  // population variance of member means
      for (double v : mus) spread += (v - mu) * (v - mu);
      spread /= k;
      out.mu = mu;
      out.sigma2 = var_sum / k + spread;
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<TrainedModel>> members_;
};

}  // namespace

std::size_t mlp_param_count(const MlpSpec& spec) {
  return spec.n_in * spec.n_hidden + spec.n_hidden + spec.n_hidden * spec.n_out + spec.n_out;
}

std::vector<double> mlp_init_params(const MlpSpec& spec, std::uint64_t seed, double sigma) {
  std::vector<double> params(mlp_param_count(spec), 0.0);
  MlpOffsets o = mlp_offsets(spec);
  Rng rng(seed);
  for (std::size_t k = o.w1; k < o.b1; ++k) params[k] = sigma * rng.normal();
  for (std::size_t k = o.w2; k < o.b2; ++k) params[k] = sigma * rng.normal();
  return params;  // biases start at zero
}

double mlp_loss_and_gradient(const MlpSpec& spec, std::span<const double> params,
                             const DesignMatrix& m, std::span<const std::size_t> rows,
                             std::vector<double>* grad) {
  std::vector<std::size_t> storage;
  rows = resolve_rows(rows, storage, m.n_rows);
  if (params.size() != mlp_param_count(spec)) {
    throw ExplanovaError("mlp_loss_and_gradient: parameter size mismatch");
  }
  MlpOffsets o = mlp_offsets(spec);
  if (grad) grad->assign(params.size(), 0.0);
  double n = static_cast<double>(rows.size());
  double loss = 0.0;
  std::vector<double> a(spec.n_hidden), z(spec.n_out), dz2(spec.n_out), dz1(spec.n_hidden);
  for (std::size_t r : rows) {
    std::span<const double> x = m.row(r);
    for (std::size_t j = 0; j < spec.n_hidden; ++j) {
      double s = params[o.b1 + j];
      for (std::size_t i = 0; i < spec.n_in; ++i) {
        s += x[i] * params[o.w1 + i * spec.n_hidden + j];
      }
      a[j] = std::tanh(s);
    }
    for (std::size_t c = 0; c < spec.n_out; ++c) {
      double s = params[o.b2 + c];
      for (std::size_t j = 0; j < spec.n_hidden; ++j) {
        s += a[j] * params[o.w2 + j * spec.n_out + c];
      }
      z[c] = s;
    }
    if (spec.task == TaskKind::Classification) {
      softmax_inplace(z);
      int label = m.labels[r];
      loss += -std::log(std::max(z[label], 1e-300));
      for (std::size_t c = 0; c < spec.n_out; ++c) dz2[c] = z[c];
      dz2[label] -= 1.0;
    } else {
      double diff = z[0] - m.y[r];
      loss += 0.5 * diff * diff;
      dz2[0] = diff;
    }
    if (grad) {
      std::vector<double>& g = *grad;
      for (std::size_t c = 0; c < spec.n_out; ++c) g[o.b2 + c] += dz2[c];
      for (std::size_t j = 0; j < spec.n_hidden; ++j) {
        double da = 0.0;
        for (std::size_t c = 0; c < spec.n_out; ++c) {
          da += params[o.w2 + j * spec.n_out + c] * dz2[c];
          g[o.w2 + j * spec.n_out + c] += a[j] * dz2[c];
        }
        dz1[j] = da * (1.0 - a[j] * a[j]);
        g[o.b1 + j] += dz1[j];
      }
      for (std::size_t i = 0; i < spec.n_in; ++i) {
        double xv = x[i];
        if (xv == 0.0) continue;
        for (std::size_t j = 0; j < spec.n_hidden; ++j) {
          g[o.w1 + i * spec.n_hidden + j] += xv * dz1[j];
        }
      }
    }
  }
  loss /= n;
  if (grad) {
    for (double& v : *grad) v /= n;
  }
  return loss;
}

std::unique_ptr<TrainedModel> fit_model(ModelFamily family, const DesignMatrix& m,
                                        std::span<const std::size_t> rows, std::uint64_t seed,
                                        const ModelHyperparams& hp) {
  counters().model_fits++;
  switch (family) {
    case ModelFamily::Linear:
      if (m.task == TaskKind::Classification) return std::make_unique<LogisticModel>(m, rows, hp);
      return std::make_unique<LinearRegressionModel>(m, rows, hp);
    case ModelFamily::Tree:
      return std::make_unique<TreeModel>(m, rows, hp);
    case ModelFamily::Mlp:
      return std::make_unique<MlpModel>(m, rows, seed, hp);
    case ModelFamily::Ensemble: {
      std::vector<std::unique_ptr<TrainedModel>> members;
      members.push_back(fit_model(ModelFamily::Linear, m, rows, mix_seed(seed, "member", 0), hp));
      members.push_back(fit_model(ModelFamily::Tree, m, rows, mix_seed(seed, "member", 1), hp));
      members.push_back(fit_model(ModelFamily::Mlp, m, rows, mix_seed(seed, "member", 2), hp));
      return std::make_unique<EnsembleModel>(std::move(members));
    }
  }
  throw ExplanovaError("unknown model family");
}

std::unique_ptr<TrainedModel> make_ensemble(std::vector<std::unique_ptr<TrainedModel>> members) {
  if (members.empty()) throw ExplanovaError("make_ensemble: no members");
  return std::make_unique<EnsembleModel>(std::move(members));
}

double nll_classification(const std::vector<std::vector<double>>& probs,
                          const std::vector<int>& labels) {
  if (probs.size() != labels.size()) throw ExplanovaError("nll_classification: length mismatch");
  if (probs.empty()) throw ExplanovaError("nll_classification: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const std::vector<double>& row = probs[i];
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= row.size()) {
      throw ExplanovaError("nll_classification: label out of range");
    }
    // predict() already floors probabilities at kEpsilon, so the closed form
    // -ln p stays finite for model output and exact for perfect predictions
    total += -std::log(row[labels[i]]);
  }
  return total / static_cast<double>(probs.size());
}

double nll_regression(const std::vector<double>& mu, const std::vector<double>& sigma2,
                      const std::vector<double>& y) {
  if (mu.size() != y.size() || sigma2.size() != y.size()) {
    throw ExplanovaError("nll_regression: length mismatch");
  }
  if (y.empty()) throw ExplanovaError("nll_regression: empty input");
  constexpr double kTwoPi = 2.0 * 3.141592653589793238462643383279502884;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = std::max(sigma2[i], kEpsilon);
    double diff = y[i] - mu[i];
    total += 0.5 * std::log(kTwoPi * v) + diff * diff / (2.0 * v);
  }
  return total / static_cast<double>(y.size());
}

double evaluate_nll(const TrainedModel& model, const DesignMatrix& m,
                    std::span<const std::size_t> rows) {
  std::vector<std::size_t> storage;
  rows = resolve_rows(rows, storage, m.n_rows);
  if (model.task() == TaskKind::Classification) {
    std::vector<std::vector<double>> probs;
    std::vector<int> labels;
    probs.reserve(rows.size());
    labels.reserve(rows.size());
    for (std::size_t i : rows) {
      probs.push_back(model.predict(m.row(i)).probs);
      labels.push_back(m.labels[i]);
    }
    return nll_classification(probs, labels);
  }
  std::vector<double> mus, vars, ys;
  mus.reserve(rows.size());
  vars.reserve(rows.size());
  ys.reserve(rows.size());
  for (std::size_t i : rows) {
    Prediction p = model.predict(m.row(i));
    mus.push_back(p.mu);
    vars.push_back(p.sigma2);
    ys.push_back(m.y[i]);
  }
  return nll_regression(mus, vars, ys);
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                    std::uint64_t seed) {
  if (k < 2) throw ExplanovaError("kfold_indices: need at least 2 folds");
  if (k > n) throw ExplanovaError("kfold_indices: more folds than rows");
  std::vector<std::size_t> perm = random_permutation(n, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t begin = f * n / k;
    std::size_t end = (f + 1) * n / k;
    folds[f].assign(perm.begin() + begin, perm.begin() + end);
  }
  return folds;
}

CvResult cross_validate(ModelFamily family, const DesignMatrix& m, std::size_t k,
                        std::uint64_t seed, const ModelHyperparams& hp) {
  // the fold seed never depends on the family, so all families share splits
  std::vector<std::vector<std::size_t>> folds = kfold_indices(m.n_rows, k, mix_seed(seed, "folds"));
  CvResult res;
  std::vector<bool> held(m.n_rows, false);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::fill(held.begin(), held.end(), false);
    for (std::size_t i : folds[f]) held[i] = true;
    std::vector<std::size_t> train;
    train.reserve(m.n_rows - folds[f].size());
    for (std::size_t i = 0; i < m.n_rows; ++i) {
      if (!held[i]) train.push_back(i);
    }
    auto model = fit_model(family, m, train, mix_seed(seed, "fit", f), hp);
    res.fold_nlls.push_back(evaluate_nll(*model, m, folds[f]));
  }
  res.mean_nll = mean_of(res.fold_nlls);
  return res;
}

ModelReport select_best_model(const DesignMatrix& m, std::uint64_t seed,
                              const ModelHyperparams& hp, std::size_t workers) {
  std::uint64_t cv_seed = mix_seed(seed, "cv");
  std::vector<CvResult> results(4);
  parallel_for(4, std::min<std::size_t>(workers, 4), [&](std::size_t i) {
    results[i] = cross_validate(kAllFamilies[i], m, 5, cv_seed, hp);
  });
  ModelReport report;
  report.target = m.target_name;
  report.task = m.task;
  std::size_t best = 0;
  auto ordered = [](double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; };
  for (std::size_t i = 0; i < 4; ++i) {
    report.cv_nll.emplace_back(kAllFamilies[i], results[i].mean_nll);
    if (ordered(results[i].mean_nll) < ordered(results[best].mean_nll)) best = i;
  }
  report.best_family = kAllFamilies[best];
  report.best_nll = results[best].mean_nll;
  report.best_fold_nlls = results[best].fold_nlls;
  report.model = fit_model(report.best_family, m, {}, mix_seed(seed, "final"), hp);
  return report;
}

}  // namespace explanova
