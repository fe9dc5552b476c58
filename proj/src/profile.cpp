#include "explanova/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "explanova/stats.hpp"
#include "explanova/util.hpp"

namespace explanova {

ContinuousStats continuous_summary(std::span<const double> values) {
  if (values.empty()) throw ExplanovaError("continuous_summary: empty input");
  ContinuousStats s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.mean = mean_of(values);
  s.median = quantile_sorted(sorted, 0.5);
  s.variance = sample_variance(values);
  s.std_dev = std::sqrt(s.variance);
  s.min = sorted.front();
  s.max = sorted.back();
  s.range = s.max - s.min;
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.iqr = s.q3 - s.q1;
  return s;
}

DiscreteStats discrete_summary(const Feature& feature) {
  if (feature.values.empty()) throw ExplanovaError("discrete_summary: empty feature");
  std::map<int, std::size_t> counts;
  for (double v : feature.values) ++counts[static_cast<int>(v)];
  DiscreteStats s;
  s.n_categories = counts.size();
  s.frequencies.assign(counts.begin(), counts.end());
  std::stable_sort(s.frequencies.begin(), s.frequencies.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  double n = static_cast<double>(feature.values.size());
  s.proportions.reserve(s.frequencies.size());
  for (const auto& [code, count] : s.frequencies) {
    s.proportions.emplace_back(code, static_cast<double>(count) / n);
  }
  return s;
}

std::vector<double> gower_distance_matrix(const FeatureTable& table, std::size_t workers) {
  std::size_t n = table.n_rows;
  std::size_t m = table.features.size();
  if (m == 0) throw ExplanovaError("gower_distance_matrix: table has no features");
  std::vector<double> ranges(m, 0.0);
  for (std::size_t f = 0; f < m; ++f) {
    const auto& vals = table.features[f].values;
    if (table.features[f].kind == FeatureClass::Continuous && !vals.empty()) {
      auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
      ranges[f] = *hi - *lo;
    }
  }
  std::vector<double> dist(n * n, 0.0);
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t f = 0; f < m; ++f) {
        const auto& feat = table.features[f];
        double a = feat.values[i];
        double b = feat.values[j];
        if (feat.kind == FeatureClass::Continuous) {
          if (ranges[f] > 0.0) sum += std::abs(a - b) / ranges[f];
        } else {
          sum += a == b ? 0.0 : 1.0;
        }
      }
      double d = sum / static_cast<double>(m);
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  });
  return dist;
}

namespace {

constexpr double kLambdaCap = 1e12;

double lambda_of(double distance) {
  if (distance <= 1e-12) return kLambdaCap;
  return std::min(1.0 / distance, kLambdaCap);
}

struct DendroNode {
  std::int64_t left = -1;
  std::int64_t right = -1;
  std::size_t size = 1;
  double distance = 0.0;
};

struct CondensedCluster {
  int parent = -1;
  double birth = 0.0;
  double stability = 0.0;
  int child_a = -1;
  int child_b = -1;
};

}  // namespace

std::vector<int> hdbscan_labels(const std::vector<double>& distances, std::size_t n,
                                const ClusterConfig& cfg) {
  if (distances.size() != n * n) throw ExplanovaError("hdbscan_labels: matrix size mismatch");
  std::vector<int> labels(n, kNoise);
  if (n == 0) return labels;
  std::size_t mcs = std::max<std::size_t>(2, cfg.min_cluster_size);
  if (n < mcs) return labels;  // too small to form any cluster

  // core distance: distance to the min_samples-th nearest other point
  std::size_t ms = std::min(cfg.min_samples, n - 1);
  if (ms == 0) ms = 1;
  std::vector<double> core(n, 0.0);
  {
    std::vector<double> buf;
    for (std::size_t i = 0; i < n; ++i) {
      buf.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) buf.push_back(distances[i * n + j]);
      }
      std::nth_element(buf.begin(), buf.begin() + (ms - 1), buf.end());
      core[i] = buf[ms - 1];
    }
  }
  auto mutual_reach = [&](std::size_t i, std::size_t j) {
    return std::max({core[i], core[j], distances[i * n + j]});
  };

  // Prim MST over the mutual-reachability graph; ties resolve to the lowest
  // vertex index so the dendrogram is deterministic.
  struct Edge {
    double w;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  {
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(n, 0);
    std::vector<bool> used(n, false);
    used[0] = true;
    for (std::size_t j = 1; j < n; ++j) {
      best[j] = mutual_reach(0, j);
      from[j] = 0;
    }
    for (std::size_t step = 1; step < n; ++step) {
      std::size_t pick = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (!used[j] && (pick == n || best[j] < best[pick])) pick = j;
      }
      used[pick] = true;
      edges.push_back({best[pick], std::min(from[pick], pick), std::max(from[pick], pick)});
      for (std::size_t j = 0; j < n; ++j) {
        if (!used[j]) {
          double w = mutual_reach(pick, j);
          if (w < best[j]) {
            best[j] = w;
            from[j] = pick;
          }
        }
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  // single-linkage dendrogram (union-find over node ids; internal nodes n..2n-2)
  std::vector<DendroNode> nodes(2 * n - 1);
  std::vector<std::int64_t> uf(2 * n - 1, -1);
  std::function<std::int64_t(std::int64_t)> find = [&](std::int64_t x) {
    while (uf[x] >= 0) {
      if (uf[uf[x]] >= 0) uf[x] = uf[uf[x]];
      x = uf[x];
    }
    return x;
  };
  std::size_t next_node = n;
  for (const Edge& e : edges) {
    std::int64_t ra = find(static_cast<std::int64_t>(e.a));
    std::int64_t rb = find(static_cast<std::int64_t>(e.b));
    if (ra == rb) continue;
    DendroNode& nd = nodes[next_node];
    nd.left = ra;
    nd.right = rb;
    nd.size = nodes[ra].size + nodes[rb].size;
    nd.distance = e.w;
    uf[ra] = static_cast<std::int64_t>(next_node);
    uf[rb] = static_cast<std::int64_t>(next_node);
    ++next_node;
  }
  std::int64_t root = static_cast<std::int64_t>(next_node - 1);

  auto collect_points = [&](std::int64_t v, std::vector<std::size_t>& out) {
    std::vector<std::int64_t> stack{v};
    while (!stack.empty()) {
      std::int64_t cur = stack.back();
      stack.pop_back();
      if (cur < static_cast<std::int64_t>(n)) {
        out.push_back(static_cast<std::size_t>(cur));
      } else {
        stack.push_back(nodes[cur].left);
        stack.push_back(nodes[cur].right);
      }
    }
  };

  // condensed tree: walk top-down, keeping a cluster alive through splits
  // that shed fewer than min_cluster_size points
  std::vector<CondensedCluster> cond;
  cond.push_back({-1, 0.0, 0.0, -1, -1});
  std::vector<int> fallout(n, 0);  // condensed cluster each point fell out of
  std::vector<std::pair<std::int64_t, int>> work{{root, 0}};
  std::vector<std::size_t> scratch;
  while (!work.empty()) {
    auto [v, c] = work.back();
    work.pop_back();
    double lam = lambda_of(nodes[v].distance);
    std::int64_t l = nodes[v].left;
    std::int64_t r = nodes[v].right;
    std::size_t sl = nodes[l].size;
    std::size_t sr = nodes[r].size;
    if (sl >= mcs && sr >= mcs) {
      cond[c].stability += static_cast<double>(sl + sr) * (lam - cond[c].birth);
      int ca = static_cast<int>(cond.size());
      cond.push_back({c, lam, 0.0, -1, -1});
      int cb = static_cast<int>(cond.size());
      cond.push_back({c, lam, 0.0, -1, -1});
      cond[c].child_a = ca;
      cond[c].child_b = cb;
      work.push_back({l, ca});
      work.push_back({r, cb});
    } else if (sl >= mcs || sr >= mcs) {
      std::int64_t keep = sl >= mcs ? l : r;
      std::int64_t shed = sl >= mcs ? r : l;
      cond[c].stability += static_cast<double>(nodes[shed].size) * (lam - cond[c].birth);
      scratch.clear();
      collect_points(shed, scratch);
      for (std::size_t p : scratch) fallout[p] = c;
      work.push_back({keep, c});
    } else {
      // cluster dissolves: everything under v leaves at this split
      cond[c].stability += static_cast<double>(sl + sr) * (lam - cond[c].birth);
      scratch.clear();
      collect_points(v, scratch);
      for (std::size_t p : scratch) fallout[p] = c;
    }
  }

  // excess-of-mass selection, root participating (a structureless table
  // collapses to a single cluster rather than all-noise)
  std::size_t nc = cond.size();
  std::vector<bool> selected(nc, false);
  std::vector<double> score(nc, 0.0);
  for (std::size_t idx = nc; idx-- > 0;) {
    CondensedCluster& c = cond[idx];
    if (c.child_a < 0) {
      selected[idx] = true;
      score[idx] = c.stability;
      continue;
    }
    double child_sum = score[c.child_a] + score[c.child_b];
    if (c.stability >= child_sum) {
      selected[idx] = true;
      score[idx] = c.stability;
      // deselect every descendant
      std::vector<int> stack{c.child_a, c.child_b};
      while (!stack.empty()) {
        int d = stack.back();
        stack.pop_back();
        selected[d] = false;
        if (cond[d].child_a >= 0) {
          stack.push_back(cond[d].child_a);
          stack.push_back(cond[d].child_b);
        }
      }
    } else {
      score[idx] = child_sum;
    }
  }

  // each point belongs to the nearest selected ancestor of its fall-out cluster
  std::vector<int> owner(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    int c = fallout[p];
    while (c >= 0 && !selected[c]) c = cond[c].parent;
    owner[p] = c;
  }
  // order selected clusters by their lowest member row for stable label codes
  std::map<int, std::size_t> first_member;
  for (std::size_t p = 0; p < n; ++p) {
    if (owner[p] >= 0 && !first_member.count(owner[p])) first_member[owner[p]] = p;
  }
  std::vector<std::pair<std::size_t, int>> ordering;
  ordering.reserve(first_member.size());
  for (const auto& [c, p] : first_member) ordering.emplace_back(p, c);
  std::sort(ordering.begin(), ordering.end());
  std::map<int, int> label_of;
  for (std::size_t i = 0; i < ordering.size(); ++i) label_of[ordering[i].second] = static_cast<int>(i);
  for (std::size_t p = 0; p < n; ++p) {
    labels[p] = owner[p] >= 0 ? label_of[owner[p]] : kNoise;
  }
  return labels;
}

ClusterOutcome cluster_feature(FeatureTable& table, const ClusterConfig& cfg, std::size_t workers) {
  ClusterOutcome out;
  if (table.n_rows == 0 || table.features.empty()) {
    out.note = "no data to cluster";
    return out;
  }
  std::size_t n = table.n_rows;
  std::vector<double> dist = gower_distance_matrix(table, workers);
  std::vector<int> labels = hdbscan_labels(dist, n, cfg);
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  out.n_clusters = static_cast<std::size_t>(k);
  if (k < 2) {
    out.note = "fewer than two clusters found";
    return out;
  }
  // medoid per cluster: member minimizing total in-cluster distance (lowest
  // row index on ties)
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t p = 0; p < n; ++p) {
    if (labels[p] >= 0) members[labels[p]].push_back(p);
  }
  std::vector<std::size_t> medoid(k, 0);
  for (int c = 0; c < k; ++c) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t cand : members[c]) {
      double total = 0.0;
      for (std::size_t other : members[c]) total += dist[cand * n + other];
      if (total < best) {
        best = total;
        medoid[c] = cand;
      }
    }
  }
  double sq_sum = 0.0;
  std::size_t clustered = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels[p] < 0) continue;
    double d = dist[p * n + medoid[labels[p]]];
    sq_sum += d * d;
    ++clustered;
  }
  out.quality = clustered > 0 ? sq_sum / static_cast<double>(clustered) : 0.0;
  if (out.quality > cfg.quality_threshold) {
    out.note = "cluster quality above threshold (" + fmt_fixed(out.quality) + ")";
    return out;
  }
  bool has_noise = std::any_of(labels.begin(), labels.end(), [](int l) { return l < 0; });
  Feature f;
  f.name = kClusterFeatureName;
  f.kind = FeatureClass::Discrete;
  f.values.reserve(n);
  for (int l : labels) f.values.push_back(l >= 0 ? static_cast<double>(l) : static_cast<double>(k));
  for (int c = 0; c < k; ++c) f.category_mapping.emplace_back("cluster_" + std::to_string(c), c);
  if (has_noise) f.category_mapping.emplace_back("noise", k);
  f.description = "Density-based row grouping derived from pairwise similarity.";
  table.features.push_back(std::move(f));
  out.appended = true;
  out.note = "appended " + std::to_string(k) + "-cluster feature";
  return out;
}

}  // namespace explanova
