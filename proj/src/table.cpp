#include "explanova/table.hpp"

#include "explanova/util.hpp"

namespace explanova {

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::ContinuousNumeric: return "continuous";
    case FeatureKind::DiscreteNumeric: return "discrete";
    case FeatureKind::NonNumericCategorical: return "categorical";
    case FeatureKind::IdLike: return "id";
    case FeatureKind::TimeRelated: return "time";
  }
  return "unknown";
}

const char* to_string(FeatureClass cls) {
  return cls == FeatureClass::Continuous ? "continuous" : "discrete";
}

std::vector<std::optional<std::string>> RawTable::column(std::size_t c) const {
  std::vector<std::optional<std::string>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.at(c));
  return out;
}

std::vector<int> Feature::codes() const {
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(static_cast<int>(v));
  return out;
}

const std::string& Feature::label_of(int code) const {
  for (const auto& [label, c] : category_mapping) {
    if (c == code) return label;
  }
  throw ExplanovaError("unknown category code for feature '" + name + "'");
}

const Feature* FeatureTable::find(std::string_view feature_name) const {
  for (const auto& f : features) {
    if (f.name == feature_name) return &f;
  }
  return nullptr;
}

}  // namespace explanova
