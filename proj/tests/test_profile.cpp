#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "explanova/profile.hpp"

using namespace explanova;

namespace {

Feature continuous_feature(std::string name, std::vector<double> values) {
  Feature f;
  f.name = std::move(name);
  f.kind = FeatureClass::Continuous;
  f.values = std::move(values);
  return f;
}

Feature discrete_feature(std::string name, std::vector<double> codes,
                         std::vector<std::pair<std::string, int>> mapping) {
  Feature f;
  f.name = std::move(name);
  f.kind = FeatureClass::Discrete;
  f.values = std::move(codes);
  f.category_mapping = std::move(mapping);
  return f;
}

FeatureTable table_of(std::vector<Feature> features) {
  FeatureTable t;
  t.name = "t";
  t.n_rows = features.empty() ? 0 : features[0].values.size();
  t.features = std::move(features);
  return t;
}

}  // namespace

TEST_CASE("continuous summary, hand-derived") {
  ContinuousStats s = continuous_summary(std::vector<double>{1, 2, 3, 4});
  CHECK(s.mean == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(s.median == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(s.variance == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(s.std_dev == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));
  CHECK(s.min == 1.0);
  CHECK(s.max == 4.0);
  CHECK(s.range == 3.0);
  CHECK(s.q1 == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(s.q3 == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(s.iqr == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("discrete summary orders by count then code") {
  Feature f = discrete_feature("d", {1, 1, 0, 2, 2, 2}, {{"a", 0}, {"b", 1}, {"c", 2}});
  DiscreteStats s = discrete_summary(f);
  CHECK(s.n_categories == 3);
  REQUIRE(s.frequencies.size() == 3);
  CHECK(s.frequencies[0] == std::pair<int, std::size_t>{2, 3});
  CHECK(s.frequencies[1] == std::pair<int, std::size_t>{1, 2});
  CHECK(s.frequencies[2] == std::pair<int, std::size_t>{0, 1});
  CHECK(s.proportions[0].second == doctest::Approx(0.5));
  // count ties resolve toward the lower code
  Feature g = discrete_feature("g", {1, 0, 1, 0}, {{"a", 0}, {"b", 1}});
  DiscreteStats sg = discrete_summary(g);
  CHECK(sg.frequencies[0].first == 0);
}

TEST_CASE("gower distances, hand-derived") {
  FeatureTable t = table_of({continuous_feature("c", {0, 5, 10}),
                             discrete_feature("d", {0, 0, 1}, {{"x", 0}, {"y", 1}})});
  auto dist = gower_distance_matrix(t);
  REQUIRE(dist.size() == 9);
  auto at = [&](std::size_t i, std::size_t j) { return dist[i * 3 + j]; };
  CHECK(at(0, 0) == 0.0);
  CHECK(at(0, 1) == doctest::Approx(0.25).epsilon(1e-12));  // (0.5 + 0) / 2
  CHECK(at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));   // (1 + 1) / 2
  CHECK(at(1, 2) == doctest::Approx(0.75).epsilon(1e-12));  // (0.5 + 1) / 2
  CHECK(at(2, 0) == at(0, 2));                              // symmetry

  // zero-range features contribute no dissimilarity
  FeatureTable flat = table_of({continuous_feature("c", {3, 3, 3})});
  auto dflat = gower_distance_matrix(flat);
  for (double d : dflat) CHECK(d == 0.0);
}

TEST_CASE("hdbscan separates two tight blobs") {
  const std::size_t n = 40;
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      bool same = (i < 20) == (j < 20);
      dist[i * n + j] = same ? 0.01 : 1.0;
    }
  }
  auto labels = hdbscan_labels(dist, n, ClusterConfig{});
  REQUIRE(labels.size() == n);
  std::set<int> uniq(labels.begin(), labels.end());
  CHECK(uniq == std::set<int>{0, 1});  // two clusters, zero noise
  CHECK(labels[0] == 0);               // codes ordered by first member row
  CHECK(labels[19] == 0);
  CHECK(labels[20] == 1);
  CHECK(labels[39] == 1);
}

TEST_CASE("hdbscan on fully identical points yields one cluster, not noise") {
  const std::size_t n = 40;
  std::vector<double> dist(n * n, 0.0);
  auto labels = hdbscan_labels(dist, n, ClusterConfig{});
  for (int l : labels) CHECK(l == 0);
}

TEST_CASE("hdbscan below the minimum cluster size is all noise") {
  const std::size_t n = 5;
  std::vector<double> dist(n * n, 0.5);
  for (std::size_t i = 0; i < n; ++i) dist[i * n + i] = 0.0;
  auto labels = hdbscan_labels(dist, n, ClusterConfig{});
  for (int l : labels) CHECK(l == kNoise);
}

TEST_CASE("uniform chain collapses to a single cluster") {
  const std::size_t n = 200;
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<double>(i);
  FeatureTable t = table_of({continuous_feature("c", values)});
  auto labels = hdbscan_labels(gower_distance_matrix(t), n, ClusterConfig{});
  std::set<int> uniq(labels.begin(), labels.end());
  CHECK(uniq.size() == 1);
}

TEST_CASE("cluster feature appends labeled blob memberships") {
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) values.push_back(0.0);
  for (int i = 0; i < 20; ++i) values.push_back(10.0);
  FeatureTable t = table_of({continuous_feature("c", values)});
  ClusterOutcome out = cluster_feature(t, ClusterConfig{});
  CHECK(out.appended);
  CHECK(out.n_clusters == 2);
  CHECK(out.quality == doctest::Approx(0.0));
  REQUIRE(t.features.size() == 2);
  const Feature& cf = t.features.back();
  CHECK(cf.name == kClusterFeatureName);
  CHECK(cf.is_discrete());
  CHECK(cf.label_of(0) == "cluster_0");
  CHECK(cf.label_of(1) == "cluster_1");
  CHECK(cf.values[0] == 0.0);
  CHECK(cf.values[39] == 1.0);
}

TEST_CASE("cluster feature is withheld when structure is weak") {
  // single blob: fewer than two clusters
  FeatureTable one = table_of({continuous_feature("c", std::vector<double>(40, 1.0))});
  ClusterOutcome o1 = cluster_feature(one, ClusterConfig{});
  CHECK(!o1.appended);
  CHECK(o1.note == "fewer than two clusters found");
  CHECK(one.features.size() == 1);

  // quality gate: force an impossible threshold
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) values.push_back(0.0);
  for (int i = 0; i < 20; ++i) values.push_back(10.0);
  FeatureTable two = table_of({continuous_feature("c", values)});
  ClusterConfig strict;
  strict.quality_threshold = -1.0;
  ClusterOutcome o2 = cluster_feature(two, strict);
  CHECK(!o2.appended);
  CHECK(o2.note.find("cluster quality above threshold") == 0);

  // empty table
  FeatureTable empty;
  empty.n_rows = 0;
  ClusterOutcome o3 = cluster_feature(empty, ClusterConfig{});
  CHECK(!o3.appended);
}
