#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace explanova {

// Column type as inferred before encoding.
enum class FeatureKind {
  ContinuousNumeric,
  DiscreteNumeric,
  NonNumericCategorical,
  IdLike,
  TimeRelated,
};

const char* to_string(FeatureKind kind);

// Type of an encoded feature; time columns become continuous and categorical
// columns become discrete codes.
enum class FeatureClass { Continuous, Discrete };

const char* to_string(FeatureClass cls);

struct RawTable {
  std::string name;
  std::vector<std::string> column_names;
  // row-major; nullopt marks a missing cell
  std::vector<std::vector<std::optional<std::string>>> rows;
  std::uint64_t content_hash = 0;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return column_names.size(); }
  std::vector<std::optional<std::string>> column(std::size_t c) const;
};

struct Feature {
  std::string name;
  FeatureClass kind = FeatureClass::Continuous;
  std::vector<double> values;  // discrete features hold integer codes
  // discrete only: label -> code, ascending label order, codes 0..C-1
  std::vector<std::pair<std::string, int>> category_mapping;
  std::size_t missing_imputed = 0;
  std::size_t outliers_clipped = 0;
  std::string description;

  bool is_discrete() const { return kind == FeatureClass::Discrete; }
  std::size_t category_count() const { return category_mapping.size(); }
  std::vector<int> codes() const;
  const std::string& label_of(int code) const;
};

struct DroppedColumn {
  std::string name;
  std::string reason;
};

struct FeatureTable {
  std::string name;
  std::size_t n_rows = 0;
  std::vector<Feature> features;
  std::vector<DroppedColumn> dropped;
  std::string description;

  const Feature* find(std::string_view feature_name) const;
};

enum class ImputeStrategy { Median, Mean };

struct CleaningPolicy {
  double missing_drop_threshold = 0.3;   // drop column above this missing ratio
  double outlier_drop_threshold = 0.1;   // drop column above this outlier ratio
  double fence_multiplier = 1.5;         // IQR fence half-width
  ImputeStrategy impute = ImputeStrategy::Median;
};

}  // namespace explanova
