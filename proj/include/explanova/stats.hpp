#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace explanova {

double mean_of(std::span<const double> v);
// Unbiased (n-1 divisor) variance; 0 for n == 1.
double sample_variance(std::span<const double> v);

// Quantile by linear interpolation at rank p * (n - 1); input must be sorted.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

// 1-based ranks with ties receiving the average of their rank range.
std::vector<double> average_ranks(std::span<const double> v);

// Pearson correlation; 0 when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);
// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

// Mutual information in nats. Continuous sides are discretized into
// equal-frequency bins (default 10, fewer if fewer distinct values); discrete
// sides use their codes directly.
double mutual_information(std::span<const double> x, std::span<const double> y,
                          bool x_discrete, bool y_discrete, std::size_t bins = 10);

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  double eta_squared = 0.0;
};
// One-way ANOVA of `values` across the groups given by integer codes.
// A zero within-group sum of squares with nonzero between-group spread gives
// f = +inf, p = 0, eta_squared = 1.
AnovaResult anova_oneway(std::span<const double> values, std::span<const int> groups);

// Kruskal-Wallis H with tie correction; 0 when all values are identical.
double kruskal_wallis(std::span<const double> values, std::span<const int> groups);

// Effect size sqrt(eta2 / (1 - eta2)); +inf at eta2 == 1.
double cohens_f(double eta_squared);

struct Chi2Result {
  double chi2 = 0.0;
  double p = 1.0;
  double cramers_v = 0.0;
};
// Chi-squared independence test over the contingency table of two code
// vectors. Requires at least 2 distinct codes on each side.
Chi2Result chi2_independence(std::span<const int> x_codes, std::span<const int> y_codes);

// Equal-frequency bin assignment used by mutual_information; exposed for tests.
std::vector<int> equal_frequency_bins(std::span<const double> values, std::size_t bins);

}  // namespace explanova
