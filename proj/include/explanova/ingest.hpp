#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "explanova/llm.hpp"
#include "explanova/table.hpp"

namespace explanova {

class CsvError : public ExplanovaError {
 public:
  using ExplanovaError::ExplanovaError;
};

// RFC-4180 CSV parser: quoted fields, escaped quotes, CRLF or LF endings,
// literal newlines inside quotes. First record is the header. Empty unquoted
// cells are missing. Throws CsvError on ragged rows, unterminated quotes,
// duplicate header names, or empty input.
RawTable parse_csv(std::string_view bytes, std::string table_name = "table");

// Per-column statistics feeding type decisions (both the local heuristic and
// the model-assisted path see the same numbers).
struct ColumnTraits {
  std::size_t n_rows = 0;
  std::size_t non_missing = 0;
  std::size_t distinct = 0;
  double uniqueness_ratio = 0.0;   // distinct / non_missing
  double numeric_fraction = 0.0;   // of non-missing values
  double integer_fraction = 0.0;
  double date_fraction = 0.0;      // DD-MM-YYYY / YYYY-MM-DD
  double year_fraction = 0.0;      // bare 4-digit years
};

ColumnTraits column_traits(const std::vector<std::optional<std::string>>& cells);

// Deterministic type ladder over a column's traits:
//   1. time   - >=95% dates, or a "year"-named column of >=95% 4-digit years
//   2. id     - uniqueness >= 0.98 and (all-integer or an "id"-like name)
//   3. discrete - numeric with few distinct values (<= max(20, 0.05 * rows))
//   4. continuous - any other numeric column
//   5. categorical otherwise
FeatureKind ladder_decision(std::string_view column_name, const ColumnTraits& traits);

// Heuristic-only typing for one column; throws on an all-missing column.
FeatureKind heuristic_type_fallback(std::string_view column_name,
                                    const std::vector<std::optional<std::string>>& cells);

// One type per column, via the language-model gateway with heuristic
// fallback on failure or unparseable replies. All-missing columns default to
// categorical here (the missing-ratio rule drops them during encoding).
std::vector<FeatureKind> infer_feature_types(const RawTable& table, const LlmClient& llm,
                                             std::size_t workers = 1);

struct CleanedColumn {
  std::vector<double> values;
  std::size_t imputed = 0;
};

// Missing-value policy: drop the column above the missing threshold
// (nullopt), otherwise impute (continuous: median or mean; discrete: modal
// code, lowest code on ties).
std::optional<CleanedColumn> handle_missing(const std::vector<std::optional<double>>& values,
                                            const CleaningPolicy& policy, FeatureClass cls);

struct WinsorizedColumn {
  std::vector<double> values;
  std::size_t clipped = 0;
};

// IQR-fence outlier policy for continuous columns: drop the column above the
// outlier-ratio threshold (nullopt), otherwise clip to the fences.
std::optional<WinsorizedColumn> handle_outliers(const std::vector<double>& values,
                                                const CleaningPolicy& policy);

// Applies cleaning and encoding to every column: id columns are dropped,
// time columns become day/year numbers, categorical columns become dense
// codes with an ascending-label mapping. Row count is always preserved.
FeatureTable encode_features(const RawTable& table, const std::vector<FeatureKind>& kinds,
                             const CleaningPolicy& policy, std::size_t workers = 1);

}  // namespace explanova
