#include "explanova/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "explanova/stats.hpp"

namespace explanova {

namespace {

bool is_year_token(std::string_view s) {
  std::string t = trim(s);
  if (t.size() != 4) return false;
  for (char c : t)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  int y = std::stoi(t);
  return y >= 1000 && y <= 2999;
}

bool id_like_name(std::string_view name) {
  std::string lowered = to_lower(name);
  // split on non-alphanumeric boundaries
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : lowered) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  for (const auto& t : tokens) {
    if (t == "id" || t == "uuid" || t == "guid") return true;
  }
  // covers glued forms like "customerid"
  return lowered.size() >= 2 && lowered.compare(lowered.size() - 2, 2, "id") == 0;
}

}  // namespace

RawTable parse_csv(std::string_view bytes, std::string table_name) {
  RawTable table;
  table.name = std::move(table_name);
  table.content_hash = fnv1a64(bytes);

  std::string_view data = bytes;
  if (data.size() >= 3 && data.substr(0, 3) == "\xEF\xBB\xBF") data.remove_prefix(3);
  if (data.empty()) throw CsvError("empty CSV input");

  enum class State { FieldStart, InField, InQuotes, AfterQuotes };
  State state = State::FieldStart;
  std::string field;
  std::vector<std::string> record;
  bool record_started = false;
  bool header_done = false;
  std::size_t record_index = 0;  // 0 == header

  auto end_field = [&]() {
    record.push_back(std::move(field));
    field.clear();
    state = State::FieldStart;
    record_started = true;
  };

  auto end_record = [&]() {
    end_field();
    if (!header_done) {
      for (auto& name : record) name = trim(name);
      std::set<std::string> seen;
      for (const auto& name : record) {
        if (!seen.insert(name).second) throw CsvError("duplicate column name '" + name + "'");
      }
      table.column_names = record;
      header_done = true;
    } else {
      if (record.size() != table.column_names.size()) {
        throw CsvError("row " + std::to_string(record_index) + " has " +
                       std::to_string(record.size()) + " fields, expected " +
                       std::to_string(table.column_names.size()));
      }
      std::vector<std::optional<std::string>> row;
      row.reserve(record.size());
      for (auto& cell : record) {
        if (cell.empty()) {
          row.push_back(std::nullopt);
        } else {
          row.push_back(std::move(cell));
        }
      }
      table.rows.push_back(std::move(row));
    }
    record.clear();
    record_started = false;
    ++record_index;
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    bool newline = false;
    if (c == '\r') {
      if (state == State::InQuotes) {
        field += c;
        continue;
      }
      if (i + 1 < data.size() && data[i + 1] == '\n') ++i;
      newline = true;
    } else if (c == '\n' && state != State::InQuotes) {
      newline = true;
    }

    switch (state) {
      case State::FieldStart:
        if (newline) {
          end_record();
        } else if (c == '"') {
          state = State::InQuotes;
          record_started = true;
        } else if (c == ',') {
          end_field();
        } else {
          field += c;
          state = State::InField;
          record_started = true;
        }
        break;
      case State::InField:
        if (newline) {
          end_record();
        } else if (c == ',') {
          end_field();
        } else {
          field += c;
        }
        break;
      case State::InQuotes:
        if (c == '"') {
          state = State::AfterQuotes;
        } else {
          field += c;
        }
        break;
      case State::AfterQuotes:
        if (newline) {
          end_record();
        } else if (c == '"') {
          field += '"';
          state = State::InQuotes;
        } else if (c == ',') {
          end_field();
        } else {
          throw CsvError("unexpected character after closing quote in record " +
                         std::to_string(record_index));
        }
        break;
    }
  }
  if (state == State::InQuotes) throw CsvError("unterminated quoted field");
  if (record_started || state == State::InField || state == State::AfterQuotes || !field.empty()) {
    end_record();
  }
  if (!header_done) throw CsvError("empty CSV input");
  if (table.column_names.empty()) throw CsvError("CSV header has no columns");
  return table;
}

ColumnTraits column_traits(const std::vector<std::optional<std::string>>& cells) {
  ColumnTraits t;
  t.n_rows = cells.size();
  std::set<std::string> distinct;
  std::size_t numeric = 0, integer = 0, date = 0, year = 0;
  for (const auto& cell : cells) {
    if (!cell.has_value()) continue;
    std::string trimmed = trim(*cell);
    if (trimmed.empty()) continue;
    ++t.non_missing;
    distinct.insert(trimmed);
    if (auto v = parse_double(trimmed)) {
      ++numeric;
      if (is_integer_value(*v)) ++integer;
    }
    if (parse_date_ordinal(trimmed)) ++date;
    if (is_year_token(trimmed)) ++year;
  }
  t.distinct = distinct.size();
  if (t.non_missing > 0) {
    double nm = static_cast<double>(t.non_missing);
    t.uniqueness_ratio = static_cast<double>(t.distinct) / nm;
    t.numeric_fraction = static_cast<double>(numeric) / nm;
    t.integer_fraction = static_cast<double>(integer) / nm;
    t.date_fraction = static_cast<double>(date) / nm;
    t.year_fraction = static_cast<double>(year) / nm;
  }
  return t;
}

FeatureKind ladder_decision(std::string_view column_name, const ColumnTraits& traits) {
  if (traits.date_fraction >= 0.95) return FeatureKind::TimeRelated;
  if (traits.year_fraction >= 0.95 && contains_ci(column_name, "year")) return FeatureKind::TimeRelated;
  if (traits.uniqueness_ratio >= 0.98 &&
      (traits.integer_fraction >= 1.0 || id_like_name(column_name))) {
    return FeatureKind::IdLike;
  }
  if (traits.numeric_fraction >= 0.95) {
    double cutoff = std::max(20.0, 0.05 * static_cast<double>(traits.n_rows));
    if (static_cast<double>(traits.distinct) <= cutoff) return FeatureKind::DiscreteNumeric;
    return FeatureKind::ContinuousNumeric;
  }
  return FeatureKind::NonNumericCategorical;
}

FeatureKind heuristic_type_fallback(std::string_view column_name,
                                    const std::vector<std::optional<std::string>>& cells) {
  ColumnTraits traits = column_traits(cells);
  if (traits.non_missing == 0) {
    throw ExplanovaError("untypeable column '" + std::string(column_name) + "': all values missing");
  }
  return ladder_decision(column_name, traits);
}

namespace {

json traits_context(const std::string& name, const ColumnTraits& t,
                    const std::vector<std::optional<std::string>>& cells) {
  json samples = json::array();
  for (const auto& cell : cells) {
    if (samples.size() >= 5) break;
    if (cell.has_value() && !trim(*cell).empty()) samples.push_back(trim(*cell));
  }
  return json{{"column_name", name},
              {"n_rows", t.n_rows},
              {"sample_values", samples},
              {"traits",
               {{"non_missing", t.non_missing},
                {"distinct", t.distinct},
                {"uniqueness_ratio", t.uniqueness_ratio},
                {"numeric_fraction", t.numeric_fraction},
                {"integer_fraction", t.integer_fraction},
                {"date_fraction", t.date_fraction},
                {"year_fraction", t.year_fraction}}}};
}

std::optional<FeatureKind> parse_type_token(const std::string& reply) {
  std::string lowered = to_lower(reply);
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : lowered) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  for (const auto& t : tokens) {
    if (t == "continuous") return FeatureKind::ContinuousNumeric;
    if (t == "discrete") return FeatureKind::DiscreteNumeric;
    if (t == "categorical") return FeatureKind::NonNumericCategorical;
    if (t == "id") return FeatureKind::IdLike;
    if (t == "time") return FeatureKind::TimeRelated;
  }
  return std::nullopt;
}

}  // namespace

std::vector<FeatureKind> infer_feature_types(const RawTable& table, const LlmClient& llm,
                                             std::size_t workers) {
  (void)workers;  // batch concurrency is governed by the client itself
  std::vector<ColumnTraits> traits(table.n_cols());
  std::vector<LlmRequest> requests;
  requests.reserve(table.n_cols());
  for (std::size_t c = 0; c < table.n_cols(); ++c) {
    auto cells = table.column(c);
    traits[c] = column_traits(cells);
    requests.push_back({PromptKind::TypeInference,
                        traits_context(table.column_names[c], traits[c], cells)});
  }
  std::vector<LlmOutcome> outcomes = llm.chat_batch(requests);
  std::vector<FeatureKind> kinds(table.n_cols());
  for (std::size_t c = 0; c < table.n_cols(); ++c) {
    std::optional<FeatureKind> kind;
    if (outcomes[c].ok) kind = parse_type_token(outcomes[c].text);
    if (!kind) {
      // heuristic fallback; all-missing columns default to categorical and
      // are dropped later by the missing-ratio rule
      kind = traits[c].non_missing == 0 ? FeatureKind::NonNumericCategorical
                                        : ladder_decision(table.column_names[c], traits[c]);
    }
    kinds[c] = *kind;
  }
  return kinds;
}

std::optional<CleanedColumn> handle_missing(const std::vector<std::optional<double>>& values,
                                            const CleaningPolicy& policy, FeatureClass cls) {
  if (values.empty()) return std::nullopt;
  std::vector<double> present;
  present.reserve(values.size());
  for (const auto& v : values)
    if (v.has_value()) present.push_back(*v);
  std::size_t missing = values.size() - present.size();
  double ratio = static_cast<double>(missing) / static_cast<double>(values.size());
  if (ratio > policy.missing_drop_threshold || present.empty()) return std::nullopt;

  double fill = 0.0;
  if (missing > 0) {
    if (cls == FeatureClass::Continuous) {
      fill = policy.impute == ImputeStrategy::Median ? quantile(present, 0.5) : mean_of(present);
    } else {
      // modal code; ties resolved toward the lowest code
      std::map<double, std::size_t> freq;
      for (double v : present) ++freq[v];
      std::size_t best_count = 0;
      for (const auto& [code, count] : freq) {
        if (count > best_count) {
          best_count = count;
          fill = code;
        }
      }
    }
  }
  CleanedColumn out;
  out.values.reserve(values.size());
  for (const auto& v : values) {
    if (v.has_value()) {
      out.values.push_back(*v);
    } else {
      out.values.push_back(fill);
      ++out.imputed;
    }
  }
  return out;
}

std::optional<WinsorizedColumn> handle_outliers(const std::vector<double>& values,
                                                const CleaningPolicy& policy) {
  if (values.empty()) return std::nullopt;
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  double q1 = quantile_sorted(sorted, 0.25);
  double q3 = quantile_sorted(sorted, 0.75);
  double iqr = q3 - q1;
  double lo = q1 - policy.fence_multiplier * iqr;
  double hi = q3 + policy.fence_multiplier * iqr;
  std::size_t outliers = 0;
  for (double v : values)
    if (v < lo || v > hi) ++outliers;
  double ratio = static_cast<double>(outliers) / static_cast<double>(values.size());
  if (ratio > policy.outlier_drop_threshold) return std::nullopt;
  WinsorizedColumn out;
  out.values.reserve(values.size());
  for (double v : values) {
    if (v < lo) {
      out.values.push_back(lo);
      ++out.clipped;
    } else if (v > hi) {
      out.values.push_back(hi);
      ++out.clipped;
    } else {
      out.values.push_back(v);
    }
  }
  return out;
}

namespace {

struct ColumnOutcome {
  std::optional<Feature> feature;
  std::optional<DroppedColumn> drop;
};

ColumnOutcome encode_continuous(const std::string& name,
                                const std::vector<std::optional<double>>& vals,
                                const CleaningPolicy& policy) {
  ColumnOutcome out;
  auto cleaned = handle_missing(vals, policy, FeatureClass::Continuous);
  if (!cleaned) {
    out.drop = DroppedColumn{name, "missing ratio above threshold"};
    return out;
  }
  auto winsorized = handle_outliers(cleaned->values, policy);
  if (!winsorized) {
    out.drop = DroppedColumn{name, "outlier ratio above threshold"};
    return out;
  }
  Feature f;
  f.name = name;
  f.kind = FeatureClass::Continuous;
  f.values = std::move(winsorized->values);
  f.missing_imputed = cleaned->imputed;
  f.outliers_clipped = winsorized->clipped;
  out.feature = std::move(f);
  return out;
}

ColumnOutcome encode_categorical(const std::string& name,
                                 const std::vector<std::optional<std::string>>& cells,
                                 const CleaningPolicy& policy, bool numeric_order) {
  // collect distinct trimmed labels
  std::set<std::string> labels;
  for (const auto& cell : cells) {
    if (!cell.has_value()) continue;
    std::string t = trim(*cell);
    if (!t.empty()) labels.insert(t);
  }
  std::vector<std::string> ordered(labels.begin(), labels.end());
  if (numeric_order) {
    std::stable_sort(ordered.begin(), ordered.end(), [](const std::string& a, const std::string& b) {
      auto va = parse_double(a);
      auto vb = parse_double(b);
      if (va && vb) {
        if (*va != *vb) return *va < *vb;
        return a < b;
      }
      if (va != vb) return va.has_value();  // numeric labels sort before text
      return a < b;
    });
  }
  std::map<std::string, int> code_of;
  std::vector<std::pair<std::string, int>> mapping;
  mapping.reserve(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    code_of[ordered[i]] = static_cast<int>(i);
    mapping.emplace_back(ordered[i], static_cast<int>(i));
  }
  std::vector<std::optional<double>> codes;
  codes.reserve(cells.size());
  for (const auto& cell : cells) {
    if (!cell.has_value()) {
      codes.push_back(std::nullopt);
      continue;
    }
    std::string t = trim(*cell);
    if (t.empty()) {
      codes.push_back(std::nullopt);
    } else {
      codes.push_back(static_cast<double>(code_of.at(t)));
    }
  }
  ColumnOutcome out;
  auto cleaned = handle_missing(codes, policy, FeatureClass::Discrete);
  if (!cleaned) {
    out.drop = DroppedColumn{name, "missing ratio above threshold"};
    return out;
  }
  Feature f;
  f.name = name;
  f.kind = FeatureClass::Discrete;
  f.values = std::move(cleaned->values);
  f.category_mapping = std::move(mapping);
  f.missing_imputed = cleaned->imputed;
  out.feature = std::move(f);
  return out;
}

ColumnOutcome encode_time(const std::string& name,
                          const std::vector<std::optional<std::string>>& cells,
                          const CleaningPolicy& policy) {
  std::size_t non_missing = 0, dates = 0, years = 0;
  for (const auto& cell : cells) {
    if (!cell.has_value()) continue;
    std::string t = trim(*cell);
    if (t.empty()) continue;
    ++non_missing;
    if (parse_date_ordinal(t)) ++dates;
    if (is_year_token(t)) ++years;
  }
  if (non_missing > 0 && static_cast<double>(dates) / static_cast<double>(non_missing) >= 0.5) {
    std::vector<std::optional<double>> vals;
    vals.reserve(cells.size());
    for (const auto& cell : cells) {
      if (cell.has_value()) {
        vals.push_back(parse_date_ordinal(*cell));  // unparseable -> missing
      } else {
        vals.push_back(std::nullopt);
      }
    }
    return encode_continuous(name, vals, policy);
  }
  if (non_missing > 0 && static_cast<double>(years) / static_cast<double>(non_missing) >= 0.5) {
    std::vector<std::optional<double>> vals;
    vals.reserve(cells.size());
    for (const auto& cell : cells) {
      if (cell.has_value() && is_year_token(*cell)) {
        vals.push_back(parse_double(trim(*cell)));
      } else {
        vals.push_back(std::nullopt);
      }
    }
    return encode_continuous(name, vals, policy);
  }
  // too few parseable time values; fall back to a categorical encoding
  return encode_categorical(name, cells, policy, false);
}

}  // namespace

FeatureTable encode_features(const RawTable& table, const std::vector<FeatureKind>& kinds,
                             const CleaningPolicy& policy, std::size_t workers) {
  if (kinds.size() != table.n_cols()) throw ExplanovaError("encode_features: one kind per column required");
  FeatureTable out;
  out.name = table.name;
  out.n_rows = table.n_rows();

  std::vector<ColumnOutcome> slots(table.n_cols());
  parallel_for(table.n_cols(), workers, [&](std::size_t c) {
    const std::string& name = table.column_names[c];
    auto cells = table.column(c);
    switch (kinds[c]) {
      case FeatureKind::IdLike:
        slots[c].drop = DroppedColumn{name, "id-like identifier"};
        break;
      case FeatureKind::ContinuousNumeric: {
        std::vector<std::optional<double>> vals;
        vals.reserve(cells.size());
        for (const auto& cell : cells) {
          if (cell.has_value()) {
            vals.push_back(parse_double(*cell));  // unparseable -> missing
          } else {
            vals.push_back(std::nullopt);
          }
        }
        slots[c] = encode_continuous(name, vals, policy);
        break;
      }
      case FeatureKind::TimeRelated:
        slots[c] = encode_time(name, cells, policy);
        break;
      case FeatureKind::DiscreteNumeric:
        slots[c] = encode_categorical(name, cells, policy, true);
        break;
      case FeatureKind::NonNumericCategorical:
        slots[c] = encode_categorical(name, cells, policy, false);
        break;
    }
  });

  for (auto& slot : slots) {
    if (slot.feature.has_value()) out.features.push_back(std::move(*slot.feature));
    if (slot.drop.has_value()) out.dropped.push_back(std::move(*slot.drop));
  }
  return out;
}

}  // namespace explanova
