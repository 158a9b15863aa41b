#include "dseval/compare.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dseval/errors.hpp"

namespace dseval {

std::string infer_dtype(const std::vector<Value>& cells);

namespace {

int rank(const Value& v) {
  switch (v.kind()) {
    case ValueKind::None: return 0;
    case ValueKind::Bool: return 1;
    case ValueKind::Int:
    case ValueKind::Float: return 2;
    case ValueKind::Str: return 3;
    case ValueKind::Seq: return 4;
    case ValueKind::Object: return 5;
    default: return 6;
  }
}

bool value_less(const Value& a, const Value& b);

bool seq_less(const std::vector<Value>& a, const std::vector<Value>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
}

bool value_less(const Value& a, const Value& b) {
  int ra = rank(a);
  int rb = rank(b);
  if (ra != rb) return ra < rb;
  switch (a.kind()) {
    case ValueKind::None: return false;
    case ValueKind::Bool: return !*a.get_if<bool>() && *b.get_if<bool>();
    case ValueKind::Int:
    case ValueKind::Float: return a.as_double() < b.as_double();
    case ValueKind::Str: return a.get_if<StrValue>()->text < b.get_if<StrValue>()->text;
    case ValueKind::Seq: return seq_less(a.get_if<SeqValue>()->items, b.get_if<SeqValue>()->items);
    case ValueKind::Object: return a.get_if<ObjectValue>()->text < b.get_if<ObjectValue>()->text;
    default: return value_to_json(a).dump() < value_to_json(b).dump();
  }
}

bool numbers_close(double x, double y, const CompareOptions& o) {
  if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y);
  if (std::isinf(x) || std::isinf(y)) return x == y;
  return std::fabs(x - y) <= o.atol + o.rtol * std::max(std::fabs(x), std::fabs(y));
}

bool cell_equal(const Value& x, const Value& y, const CompareOptions& o) {
  if (x.is_none() || y.is_none()) return x.is_none() && y.is_none();
  if (x.is_numeric() && y.is_numeric()) return numbers_close(x.as_double(), y.as_double(), o);
  if (x.kind() != y.kind()) return false;
  switch (x.kind()) {
    case ValueKind::Bool: return *x.get_if<bool>() == *y.get_if<bool>();
    case ValueKind::Str: return x.get_if<StrValue>()->text == y.get_if<StrValue>()->text;
    case ValueKind::Seq: {
      const auto& a = x.get_if<SeqValue>()->items;
      const auto& b = y.get_if<SeqValue>()->items;
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!cell_equal(a[i], b[i], o)) return false;
      }
      return true;
    }
    case ValueKind::Object: return x.get_if<ObjectValue>()->text == y.get_if<ObjectValue>()->text;
    default: return x == y;
  }
}

std::string brief(const Value& v) {
  std::string s = cell_text(v);
  if (s.size() > 60) s = s.substr(0, 60) + "...";
  return s;
}

/// First position where two cell lists differ, or npos.
std::size_t first_difference(const std::vector<Value>& a, const std::vector<Value>& b, const CompareOptions& o) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (!cell_equal(a[i], b[i], o)) return i;
  }
  return a.size() == b.size() ? std::string::npos : std::min(a.size(), b.size());
}

std::vector<Value> sorted(std::vector<Value> cells) {
  std::stable_sort(cells.begin(), cells.end(), value_less);
  return cells;
}

std::optional<SeriesValue> as_series(const Value& v) {
  if (const auto* s = v.get_if<SeriesValue>()) return *s;
  SeriesValue s;
  if (const auto* seq = v.get_if<SeqValue>()) {
    if (seq->kind == SeqKind::Set) return std::nullopt;
    s.cells = seq->items;
    s.dtype = infer_dtype(s.cells);
  } else if (const auto* a = v.get_if<ArrayValue>()) {
    if (a->shape.size() != 1) return std::nullopt;
    s.cells = a->cells;
    s.dtype = a->dtype;
  } else {
    return std::nullopt;
  }
  s.rows = s.cells.size();
  return s;
}

CompareOutcome compare_series(const SeriesValue& a, const SeriesValue& b, const CompareOptions& o) {
  if (a.cells.size() != b.cells.size()) {
    return CompareOutcome::fail(MismatchKind::Shape,
                                "length " + std::to_string(a.cells.size()) + " vs " + std::to_string(b.cells.size()));
  }
  if (!o.ignore_names) {
    if (a.name != b.name) {
      return CompareOutcome::fail(MismatchKind::Columns,
                                  "name '" + a.name.value_or("None") + "' vs '" + b.name.value_or("None") + "'");
    }
    if (!o.ignore_index && !o.ignore_order && a.index.names != b.index.names) {
      return CompareOutcome::fail(MismatchKind::Columns, "index names differ");
    }
  }
  if (dtype_family(a.dtype) != dtype_family(b.dtype)) {
    return CompareOutcome::fail(MismatchKind::Dtype, "dtype " + a.dtype + " vs " + b.dtype);
  }
  if (o.ignore_order) {
    auto i = first_difference(sorted(a.cells), sorted(b.cells), o);
    if (i != std::string::npos) return CompareOutcome::fail(MismatchKind::Value, "values differ as multisets");
    return CompareOutcome::ok();
  }
  if (!o.ignore_index) {
    auto i = first_difference(a.index.labels, b.index.labels, o);
    if (i != std::string::npos) return CompareOutcome::fail(MismatchKind::Value, "index differs at position " + std::to_string(i));
  }
  auto i = first_difference(a.cells, b.cells, o);
  if (i != std::string::npos) {
    return CompareOutcome::fail(MismatchKind::Value, "value at position " + std::to_string(i) + ": " +
                                                         brief(a.cells[i]) + " vs " + brief(b.cells[i]));
  }
  return CompareOutcome::ok();
}

CompareOutcome compare_tables(const TableValue& a, const TableValue& b, const CompareOptions& o) {
  const std::size_t rows_a = a.data.empty() ? a.index.labels.size() : a.data.front().size();
  const std::size_t rows_b = b.data.empty() ? b.index.labels.size() : b.data.front().size();
  if (rows_a != rows_b || a.columns.size() != b.columns.size()) {
    return CompareOutcome::fail(MismatchKind::Shape, "shape (" + std::to_string(rows_a) + ", " +
                                                         std::to_string(a.columns.size()) + ") vs (" +
                                                         std::to_string(rows_b) + ", " +
                                                         std::to_string(b.columns.size()) + ")");
  }
  // order[j] = column of `a` aligned with column j of `b`
  std::vector<std::size_t> order(b.columns.size());
  std::iota(order.begin(), order.end(), 0);
  if (!o.ignore_names) {
    if (a.columns != b.columns) {
      auto sa = a.columns;
      auto sb = b.columns;
      std::sort(sa.begin(), sa.end());
      std::sort(sb.begin(), sb.end());
      bool unique = std::adjacent_find(sb.begin(), sb.end()) == sb.end();
      if (sa != sb || !unique) return CompareOutcome::fail(MismatchKind::Columns, "column names differ");
      for (std::size_t j = 0; j < b.columns.size(); ++j) {
        order[j] = static_cast<std::size_t>(std::find(a.columns.begin(), a.columns.end(), b.columns[j]) - a.columns.begin());
      }
    }
    if (!o.ignore_index && !o.ignore_order && a.index.names != b.index.names) {
      return CompareOutcome::fail(MismatchKind::Columns, "index names differ");
    }
  }
  for (std::size_t j = 0; j < order.size(); ++j) {
    const auto& da = a.dtypes.at(order[j]);
    const auto& db = b.dtypes.at(j);
    if (dtype_family(da) != dtype_family(db)) {
      return CompareOutcome::fail(MismatchKind::Dtype, "column '" + b.columns[j] + "' dtype " + da + " vs " + db);
    }
  }
  if (o.ignore_order) {
    auto rows_of = [](const TableValue& t, const std::vector<std::size_t>& cols, std::size_t n) {
      std::vector<std::vector<Value>> rows(n);
      for (std::size_t r = 0; r < n; ++r) {
        for (auto c : cols) rows[r].push_back(t.data[c][r]);
      }
      std::stable_sort(rows.begin(), rows.end(), seq_less);
      return rows;
    };
    std::vector<std::size_t> identity(b.columns.size());
    std::iota(identity.begin(), identity.end(), 0);
    auto ra = rows_of(a, order, rows_a);
    auto rb = rows_of(b, identity, rows_b);
    for (std::size_t r = 0; r < ra.size(); ++r) {
      if (first_difference(ra[r], rb[r], o) != std::string::npos) {
        return CompareOutcome::fail(MismatchKind::Value, "rows differ as multisets");
      }
    }
    return CompareOutcome::ok();
  }
  if (!o.ignore_index) {
    auto i = first_difference(a.index.labels, b.index.labels, o);
    if (i != std::string::npos) return CompareOutcome::fail(MismatchKind::Value, "index differs at row " + std::to_string(i));
  }
  for (std::size_t j = 0; j < order.size(); ++j) {
    const auto& ca = a.data[order[j]];
    const auto& cb = b.data[j];
    auto i = first_difference(ca, cb, o);
    if (i != std::string::npos) {
      return CompareOutcome::fail(MismatchKind::Value, "column '" + b.columns[j] + "' row " + std::to_string(i) +
                                                           ": " + brief(ca[i]) + " vs " + brief(cb[i]));
    }
  }
  return CompareOutcome::ok();
}

CompareOutcome compare_arrays(const ArrayValue& a, const ArrayValue& b, const CompareOptions& o) {
  if (a.shape != b.shape) return CompareOutcome::fail(MismatchKind::Shape, "array shapes differ");
  if (dtype_family(a.dtype) != dtype_family(b.dtype)) {
    return CompareOutcome::fail(MismatchKind::Dtype, "dtype " + a.dtype + " vs " + b.dtype);
  }
  auto i = o.ignore_order ? first_difference(sorted(a.cells), sorted(b.cells), o) : first_difference(a.cells, b.cells, o);
  if (i != std::string::npos) return CompareOutcome::fail(MismatchKind::Value, "array element " + std::to_string(i) + " differs");
  return CompareOutcome::ok();
}

CompareOutcome compare_items(const std::vector<Value>& a, const std::vector<Value>& b, bool unordered,
                             const CompareOptions& o) {
  if (a.size() != b.size()) {
    return CompareOutcome::fail(MismatchKind::Shape, "length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const auto& xa = unordered ? sorted(a) : a;
  const auto& xb = unordered ? sorted(b) : b;
  for (std::size_t i = 0; i < xa.size(); ++i) {
    auto r = compare_values(xa[i], xb[i], o);
    if (!r.match) {
      r.detail = "item " + std::to_string(i) + ": " + r.detail;
      return r;
    }
  }
  return CompareOutcome::ok();
}

CompareOutcome compare_dicts(const DictValue& a, const DictValue& b, const CompareOptions& o) {
  if (a.keys.size() != b.keys.size()) return CompareOutcome::fail(MismatchKind::Value, "dict keys differ");
  CompareOptions exact = o;
  exact.atol = exact.rtol = 0;
  for (std::size_t j = 0; j < b.keys.size(); ++j) {
    std::size_t i = 0;
    while (i < a.keys.size() && !compare_values(a.keys[i], b.keys[j], exact).match) ++i;
    if (i == a.keys.size()) return CompareOutcome::fail(MismatchKind::Value, "missing key " + brief(b.keys[j]));
    auto r = compare_values(a.values[i], b.values[j], o);
    if (!r.match) {
      r.detail = "key " + brief(b.keys[j]) + ": " + r.detail;
      return r;
    }
  }
  return CompareOutcome::ok();
}

bool type_compatible(const Value& a, const Value& b) {
  if (a.is_numeric() && b.is_numeric()) return true;
  if (a.kind() != b.kind()) return false;
  if (const auto* sa = a.get_if<SeqValue>()) {
    const auto* sb = b.get_if<SeqValue>();
    return (sa->kind == SeqKind::Set) == (sb->kind == SeqKind::Set);
  }
  if (a.kind() == ValueKind::Object) return a.type_name == b.type_name;
  return true;
}

}  // namespace

std::string infer_dtype(const std::vector<Value>& cells) {
  bool all_int = true;
  bool all_num = true;
  bool all_bool = true;
  for (const auto& c : cells) {
    all_int = all_int && c.kind() == ValueKind::Int;
    all_num = all_num && (c.is_numeric() || c.is_none());
    all_bool = all_bool && c.kind() == ValueKind::Bool;
  }
  if (cells.empty()) return "object";
  if (all_bool) return "bool";
  if (all_int) return "int64";
  if (all_num) return "float64";
  return "object";
}

std::string mismatch_kind_name(MismatchKind k) {
  switch (k) {
    case MismatchKind::Type: return "type";
    case MismatchKind::Shape: return "shape";
    case MismatchKind::Columns: return "columns";
    case MismatchKind::Dtype: return "dtype";
    case MismatchKind::Value: return "value";
  }
  return "?";
}

CompareOptions CompareOptions::from_json(const nlohmann::ordered_json& opts) {
  CompareOptions o;
  if (!opts.is_object()) return o;
  auto number = [&](const char* key, double& out) {
    if (!opts.contains(key) || opts[key].is_null()) return;
    if (!opts[key].is_number()) throw ConfigError(std::string(key) + " must be a number");
    out = opts[key].get<double>();
    if (!(out >= 0)) throw ConfigError(std::string(key) + " must be >= 0");
  };
  auto flag = [&](const char* key, bool& out) {
    if (!opts.contains(key) || opts[key].is_null()) return;
    if (!opts[key].is_boolean()) throw ConfigError(std::string(key) + " must be true or false");
    out = opts[key].get<bool>();
  };
  number("atol", o.atol);
  number("rtol", o.rtol);
  flag("ignore_order", o.ignore_order);
  flag("ignore_index", o.ignore_index);
  flag("ignore_names", o.ignore_names);
  return o;
}

CompareOptions CompareOptions::relaxed(CompareOptions base) {
  base.ignore_order = base.ignore_index = base.ignore_names = true;
  return base;
}

std::string dtype_family(const std::string& dtype) {
  auto starts = [&](const char* p) { return dtype.rfind(p, 0) == 0; };
  if (starts("int") || starts("uint") || starts("Int") || starts("UInt")) return "int";
  if (starts("float") || starts("Float")) return "float";
  if (starts("bool") || starts("boolean")) return "bool";
  if (starts("complex")) return "complex";
  if (starts("datetime")) return "datetime";
  if (starts("timedelta")) return "timedelta";
  if (starts("category")) return "category";
  if (starts("object") || starts("string") || starts("str") || starts("<U") || starts("|S")) return "object";
  return dtype;
}

Value squeeze(const Value& v) {
  const auto* t = v.get_if<TableValue>();
  if (t == nullptr || t->columns.size() != 1) return v;
  SeriesValue s;
  s.name = t->columns[0];
  s.dtype = t->dtypes.empty() ? "object" : t->dtypes[0];
  s.index = t->index;
  s.cells = t->data.empty() ? std::vector<Value>{} : t->data[0];
  s.rows = t->rows;
  s.nunique = t->nunique.empty() ? -1 : t->nunique[0];
  return Value{std::move(s), "pandas.Series"};
}

std::optional<Value> index_as_series(const Value& v) {
  const RowIndex* idx = nullptr;
  if (const auto* s = v.get_if<SeriesValue>()) idx = &s->index;
  if (const auto* t = v.get_if<TableValue>()) idx = &t->index;
  if (idx == nullptr) return std::nullopt;
  SeriesValue s;
  if (idx->names.size() == 1 && idx->names[0]) s.name = idx->names[0];
  s.cells = idx->labels;
  s.dtype = infer_dtype(s.cells);
  s.rows = s.cells.size();
  return Value{std::move(s), "pandas.Series"};
}

CompareOutcome compare_values(const Value& a, const Value& b, const CompareOptions& o) {
  if (!type_compatible(a, b)) {
    return CompareOutcome::fail(MismatchKind::Type, "type " + a.type_name + " vs " + b.type_name);
  }
  switch (b.kind()) {
    case ValueKind::None: return CompareOutcome::ok();
    case ValueKind::Bool:
    case ValueKind::Int:
    case ValueKind::Float:
    case ValueKind::Str:
      if (cell_equal(a, b, o)) return CompareOutcome::ok();
      return CompareOutcome::fail(MismatchKind::Value, brief(a) + " vs " + brief(b));
    case ValueKind::Seq: {
      const auto& sa = *a.get_if<SeqValue>();
      const auto& sb = *b.get_if<SeqValue>();
      return compare_items(sa.items, sb.items, o.ignore_order || sb.kind == SeqKind::Set, o);
    }
    case ValueKind::Dict: return compare_dicts(*a.get_if<DictValue>(), *b.get_if<DictValue>(), o);
    case ValueKind::Array: return compare_arrays(*a.get_if<ArrayValue>(), *b.get_if<ArrayValue>(), o);
    case ValueKind::Series: return compare_series(*a.get_if<SeriesValue>(), *b.get_if<SeriesValue>(), o);
    case ValueKind::Table: return compare_tables(*a.get_if<TableValue>(), *b.get_if<TableValue>(), o);
    case ValueKind::Object: {
      const auto& oa = *a.get_if<ObjectValue>();
      const auto& ob = *b.get_if<ObjectValue>();
      bool same = oa.digest && ob.digest ? *oa.digest == *ob.digest : oa.text == ob.text;
      if (same) return CompareOutcome::ok();
      return CompareOutcome::fail(MismatchKind::Value, "objects differ");
    }
  }
  return CompareOutcome::fail(MismatchKind::Type, "incomparable values");
}

/// Used by partial matching: lists and 1-d arrays viewed as series.
std::optional<Value> series_view(const Value& v) {
  auto s = as_series(v);
  if (!s) return std::nullopt;
  return Value{std::move(*s), "pandas.Series"};
}

}  // namespace dseval
