#include "explanova/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "explanova/special_functions.hpp"
#include "explanova/util.hpp"

namespace explanova {

namespace {

void require_same_nonempty(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw ExplanovaError(std::string(what) + ": length mismatch");
  if (x.size() < 2) throw ExplanovaError(std::string(what) + ": needs at least 2 observations");
}

}  // namespace

double mean_of(std::span<const double> v) {
  if (v.empty()) throw ExplanovaError("mean_of: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.empty()) throw ExplanovaError("sample_variance: empty input");
  if (v.size() == 1) return 0.0;
  double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ExplanovaError("quantile: empty input");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  double rank = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    // positions i..j share the same value; assign the mean of ranks i+1..j+1
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_nonempty(x, y, "pearson");
  double mx = mean_of(x);
  double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_same_nonempty(x, y, "spearman");
  std::vector<double> rx = average_ranks(x);
  std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

std::vector<int> equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw ExplanovaError("equal_frequency_bins: empty input");
  if (bins == 0) throw ExplanovaError("equal_frequency_bins: zero bins");
  std::vector<double> distinct(values.begin(), values.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<int> out(values.size());
  if (distinct.size() <= bins) {
    // each distinct value is its own bin
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto it = std::lower_bound(distinct.begin(), distinct.end(), values[i]);
      out[i] = static_cast<int>(it - distinct.begin());
    }
    return out;
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  edges.reserve(bins - 1);
  for (std::size_t k = 1; k < bins; ++k) {
    double e = quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(bins));
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto it = std::upper_bound(edges.begin(), edges.end(), values[i]);
    out[i] = static_cast<int>(it - edges.begin());
  }
  return out;
}

double mutual_information(std::span<const double> x, std::span<const double> y,
                          bool x_discrete, bool y_discrete, std::size_t bins) {
  require_same_nonempty(x, y, "mutual_information");
  auto codes_of = [&](std::span<const double> v, bool discrete) {
    std::vector<int> codes(v.size());
    if (discrete) {
      std::map<double, int> remap;
      for (double val : v) remap.emplace(val, 0);
      int next = 0;
      for (auto& [val, code] : remap) code = next++;
      for (std::size_t i = 0; i < v.size(); ++i) codes[i] = remap[v[i]];
      return codes;
    }
    return equal_frequency_bins(v, bins);
  };
  std::vector<int> cx = codes_of(x, x_discrete);
  std::vector<int> cy = codes_of(y, y_discrete);
  int nx = *std::max_element(cx.begin(), cx.end()) + 1;
  int ny = *std::max_element(cy.begin(), cy.end()) + 1;
  std::vector<double> joint(static_cast<std::size_t>(nx) * ny, 0.0);
  std::vector<double> px(nx, 0.0), py(ny, 0.0);
  double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[static_cast<std::size_t>(cx[i]) * ny + cy[i]] += 1.0;
    px[cx[i]] += 1.0;
    py[cy[i]] += 1.0;
  }
  double mi = 0.0;
  for (int a = 0; a < nx; ++a) {
    for (int b = 0; b < ny; ++b) {
      double pxy = joint[static_cast<std::size_t>(a) * ny + b] / n;
      if (pxy <= 0.0) continue;  // 0 * ln 0 == 0
      mi += pxy * std::log(pxy / ((px[a] / n) * (py[b] / n)));
    }
  }
  return std::max(0.0, mi);
}

AnovaResult anova_oneway(std::span<const double> values, std::span<const int> groups) {
  if (values.size() != groups.size()) throw ExplanovaError("anova_oneway: length mismatch");
  if (values.size() < 3) throw ExplanovaError("anova_oneway: needs at least 3 observations");
  std::map<int, std::pair<double, std::size_t>> acc;  // code -> (sum, count)
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& [sum, count] = acc[groups[i]];
    sum += values[i];
    count += 1;
  }
  std::size_t k = acc.size();
  if (k < 2) throw ExplanovaError("anova_oneway: needs at least 2 groups");
  std::size_t n = values.size();
  if (n <= k) throw ExplanovaError("anova_oneway: no residual degrees of freedom");
  double grand = mean_of(values);
  std::map<int, double> group_mean;
  double ssb = 0.0;
  for (auto& [code, sc] : acc) {
    double gm = sc.first / static_cast<double>(sc.second);
    group_mean[code] = gm;
    ssb += static_cast<double>(sc.second) * (gm - grand) * (gm - grand);
  }
  double ssw = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double d = values[i] - group_mean[groups[i]];
    ssw += d * d;
  }
  double sst = ssb + ssw;
  AnovaResult res;
  double d1 = static_cast<double>(k - 1);
  double d2 = static_cast<double>(n - k);
  if (ssw <= sst * 1e-15 || ssw == 0.0) {
    if (ssb <= 0.0) {  // all values identical
      res.f = 0.0;
      res.p = 1.0;
      res.eta_squared = 0.0;
      return res;
    }
    res.f = std::numeric_limits<double>::infinity();
    res.p = 0.0;
    res.eta_squared = 1.0;
    return res;
  }
  res.f = (ssb / d1) / (ssw / d2);
  res.p = f_distribution_upper_tail(res.f, d1, d2);
  res.eta_squared = sst > 0.0 ? ssb / sst : 0.0;
  return res;
}

double kruskal_wallis(std::span<const double> values, std::span<const int> groups) {
  if (values.size() != groups.size()) throw ExplanovaError("kruskal_wallis: length mismatch");
  if (values.size() < 3) throw ExplanovaError("kruskal_wallis: needs at least 3 observations");
  std::vector<double> ranks = average_ranks(values);
  std::map<int, std::pair<double, std::size_t>> acc;  // code -> (rank sum, count)
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& [sum, count] = acc[groups[i]];
    sum += ranks[i];
    count += 1;
  }
  if (acc.size() < 2) throw ExplanovaError("kruskal_wallis: needs at least 2 groups");
  double n = static_cast<double>(values.size());
  double h = 0.0;
  for (auto& [code, sc] : acc) {
    double rbar = sc.first / static_cast<double>(sc.second);
    h += static_cast<double>(sc.second) * rbar * rbar;
  }
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
  // tie correction
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    tie_sum += t * t * t - t;
    i = j + 1;
  }
  double correction = 1.0 - tie_sum / (n * n * n - n);
  if (correction <= 0.0) return 0.0;  // all values identical
  return h / correction;
}

double cohens_f(double eta_squared) {
  if (eta_squared < 0.0 || eta_squared > 1.0) throw ExplanovaError("cohens_f: eta_squared outside [0, 1]");
  if (eta_squared >= 1.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(eta_squared / (1.0 - eta_squared));
}

Chi2Result chi2_independence(std::span<const int> x_codes, std::span<const int> y_codes) {
  if (x_codes.size() != y_codes.size()) throw ExplanovaError("chi2_independence: length mismatch");
  if (x_codes.empty()) throw ExplanovaError("chi2_independence: empty input");
  // only observed codes become rows/columns, so no empty margins can occur
  std::map<int, int> xi, yi;
  for (int c : x_codes) xi.emplace(c, 0);
  for (int c : y_codes) yi.emplace(c, 0);
  int r = 0, ccount = 0;
  for (auto& [code, idx] : xi) idx = r++;
  for (auto& [code, idx] : yi) idx = ccount++;
  if (r < 2 || ccount < 2) throw ExplanovaError("chi2_independence: degenerate contingency table");
  std::vector<double> table(static_cast<std::size_t>(r) * ccount, 0.0);
  std::vector<double> row_tot(r, 0.0), col_tot(ccount, 0.0);
  double n = static_cast<double>(x_codes.size());
  for (std::size_t i = 0; i < x_codes.size(); ++i) {
    int a = xi[x_codes[i]];
    int b = yi[y_codes[i]];
    table[static_cast<std::size_t>(a) * ccount + b] += 1.0;
    row_tot[a] += 1.0;
    col_tot[b] += 1.0;
  }
  double chi2 = 0.0;
  for (int a = 0; a < r; ++a) {
    for (int b = 0; b < ccount; ++b) {
      double expected = row_tot[a] * col_tot[b] / n;
      double observed = table[static_cast<std::size_t>(a) * ccount + b];
      chi2 += (observed - expected) * (observed - expected) / expected;
    }
  }
  Chi2Result res;
  res.chi2 = chi2;
  double dof = static_cast<double>(r - 1) * static_cast<double>(ccount - 1);
  res.p = chi_squared_upper_tail(chi2, dof);
  res.cramers_v = std::sqrt(chi2 / (n * static_cast<double>(std::min(r - 1, ccount - 1))));
  return res;
}

}  // namespace explanova
