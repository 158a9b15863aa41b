#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "dseval/value.hpp"

namespace dseval {

enum class MismatchKind { Type, Shape, Columns, Dtype, Value };

std::string mismatch_kind_name(MismatchKind k);

struct CompareOptions {
  double atol = 1e-6;
  double rtol = 1e-4;
  bool ignore_order = false;  // rows/elements compared as multisets; the index is dropped
  bool ignore_index = false;
  bool ignore_names = false;  // column, series and index names

  /// Reads the option keys of a validator mapping; unknown keys are ignored.
  /// Throws ConfigError for negative tolerances or wrongly typed values.
  static CompareOptions from_json(const nlohmann::ordered_json& opts);
  static CompareOptions relaxed(CompareOptions base);  // all three ignore flags on
};

struct CompareOutcome {
  bool match = true;
  std::optional<MismatchKind> kind;
  std::string detail;

  static CompareOutcome ok() { return {}; }
  static CompareOutcome fail(MismatchKind k, std::string why) { return {false, k, std::move(why)}; }
};

/// Checks, in order: container type, shape, column names, dtype family, values.
/// Numbers match when |a - b| <= atol + rtol * max(|a|, |b|); text must be equal;
/// missing cells match missing cells.
CompareOutcome compare_values(const Value& a, const Value& b, const CompareOptions& opts = {});

/// Coarse dtype family: int, float, bool, complex, datetime, timedelta, category, object, or the dtype itself.
std::string dtype_family(const std::string& dtype);

/// int64, float64, bool or object, from the cells' scalar kinds.
std::string infer_dtype(const std::vector<Value>& cells);

/// Single-column table as a series; any other value unchanged.
Value squeeze(const Value& v);

/// Series of the index labels of a series or table (multi-level labels become tuples).
std::optional<Value> index_as_series(const Value& v);

/// Series, list/tuple or 1-d array viewed as a series; nullopt otherwise.
std::optional<Value> series_view(const Value& v);

}  // namespace dseval
