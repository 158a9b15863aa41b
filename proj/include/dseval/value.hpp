#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace dseval {

struct Value;

/// Absent value or missing cell (None, NaN, NaT).
struct NoneValue {
  bool operator==(const NoneValue&) const = default;
};

struct StrValue {
  std::string text;
  bool operator==(const StrValue&) const = default;
};

enum class SeqKind { List, Tuple, Set };

struct SeqValue {
  SeqKind kind = SeqKind::List;
  std::vector<Value> items;
  bool operator==(const SeqValue&) const;
};

struct DictValue {
  std::vector<Value> keys;
  std::vector<Value> values;
  bool operator==(const DictValue&) const;
};

/// Row labels of a series or table. Multi-level labels are tuples.
struct RowIndex {
  std::vector<std::optional<std::string>> names;
  std::vector<Value> labels;
  bool operator==(const RowIndex&) const;
};

struct ArrayValue {
  std::string dtype;
  std::vector<std::size_t> shape;
  std::vector<Value> cells;  // row-major
  bool operator==(const ArrayValue&) const;
};

struct SeriesValue {
  std::optional<std::string> name;
  std::string dtype;
  RowIndex index;
  std::vector<Value> cells;
  std::size_t rows = 0;
  std::int64_t nunique = -1;
  bool operator==(const SeriesValue&) const;
};

struct TableValue {
  std::vector<std::string> columns;
  std::vector<std::string> dtypes;
  RowIndex index;
  std::vector<std::vector<Value>> data;  // column-major
  std::size_t rows = 0;
  std::vector<std::int64_t> nunique;
  bool operator==(const TableValue&) const;
};

/// Host object with no structural export; compared by digest or text.
struct ObjectValue {
  std::string text;
  std::optional<std::string> digest;
  bool operator==(const ObjectValue&) const = default;
};

enum class ValueKind { None, Bool, Int, Float, Str, Seq, Dict, Array, Series, Table, Object };

/// Materialized copy of a session variable or execution result.
struct Value {
  using Payload = std::variant<NoneValue, bool, std::int64_t, double, StrValue, SeqValue, DictValue,
                               ArrayValue, SeriesValue, TableValue, ObjectValue>;

  Payload data;
  std::string type_name;  // host type, e.g. "pandas.DataFrame"
  std::string repr;       // textual rendering, top-level values only

  Value() = default;
  Value(Payload p, std::string type = {}) : data(std::move(p)), type_name(std::move(type)) {}

  static Value none() { return Value{NoneValue{}, "NoneType"}; }
  static Value boolean(bool b) { return Value{b, "bool"}; }
  static Value integer(std::int64_t i) { return Value{i, "int"}; }
  static Value real(double d) { return Value{d, "float"}; }
  static Value str(std::string s) { return Value{StrValue{std::move(s)}, "str"}; }

  ValueKind kind() const { return static_cast<ValueKind>(data.index()); }
  bool is_none() const { return kind() == ValueKind::None; }
  bool is_numeric() const { return kind() == ValueKind::Int || kind() == ValueKind::Float; }
  double as_double() const;

  template <class T>
  const T* get_if() const { return std::get_if<T>(&data); }
  template <class T>
  T* get_if() { return std::get_if<T>(&data); }

  /// Structural equality; NaN equals NaN.
  bool operator==(const Value& other) const;
};

using Namespace = std::map<std::string, Value>;

/// Decodes the kernel's JSON value encoding.
Value value_from_json(const nlohmann::json& j);
/// Decodes a single table/array cell.
Value cell_from_json(const nlohmann::json& j);
nlohmann::json value_to_json(const Value& v);

/// Short display text of a scalar cell, as used in rendered tables.
std::string cell_text(const Value& v);

std::string kind_name(ValueKind k);

}  // namespace dseval
