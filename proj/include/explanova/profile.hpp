#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "explanova/table.hpp"

namespace explanova {

struct ContinuousStats {
  double mean = 0.0;
  double median = 0.0;
  double variance = 0.0;  // n-1 divisor
  double std_dev = 0.0;
  double min = 0.0;
  double max = 0.0;
  double range = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
};

ContinuousStats continuous_summary(std::span<const double> values);

struct DiscreteStats {
  std::size_t n_categories = 0;
  // (code, count), ordered by descending count, ascending code on ties
  std::vector<std::pair<int, std::size_t>> frequencies;
  std::vector<std::pair<int, double>> proportions;  // same order
};

DiscreteStats discrete_summary(const Feature& feature);

// Symmetric N*N Gower distance matrix (row-major): mean over features of
// range-normalized absolute difference (continuous) or code mismatch
// (discrete). Zero-range features contribute zero dissimilarity.
std::vector<double> gower_distance_matrix(const FeatureTable& table, std::size_t workers = 1);

struct ClusterConfig {
  std::size_t min_cluster_size = 15;
  std::size_t min_samples = 5;
  double quality_threshold = 0.5;  // max mean squared distance to medoids
};

inline constexpr int kNoise = -1;

// Density-based cluster labels (0..k-1, kNoise for outliers) over a
// precomputed distance matrix: mutual-reachability MST, single-linkage
// dendrogram, condensed tree, excess-of-mass selection (the root may win, so
// a fully uniform table yields one cluster rather than all noise).
std::vector<int> hdbscan_labels(const std::vector<double>& distances, std::size_t n,
                                const ClusterConfig& cfg);

struct ClusterOutcome {
  bool appended = false;
  std::size_t n_clusters = 0;
  double quality = 0.0;  // mean squared distance to the assigned medoid
  std::string note;
};

// Runs HDBSCAN over the Gower matrix and, when at least two clusters emerge
// with acceptable medoid quality, appends a discrete "__cluster" feature
// (noise points become their own category). Never a modeling target.
ClusterOutcome cluster_feature(FeatureTable& table, const ClusterConfig& cfg,
                               std::size_t workers = 1);

inline constexpr const char* kClusterFeatureName = "__cluster";

}  // namespace explanova
