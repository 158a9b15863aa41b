#include "dseval/value.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dseval {

using nlohmann::json;

bool SeqValue::operator==(const SeqValue& o) const { return kind == o.kind && items == o.items; }
bool DictValue::operator==(const DictValue& o) const { return keys == o.keys && values == o.values; }
bool RowIndex::operator==(const RowIndex& o) const { return names == o.names && labels == o.labels; }
bool ArrayValue::operator==(const ArrayValue& o) const {
  return dtype == o.dtype && shape == o.shape && cells == o.cells;
}
bool SeriesValue::operator==(const SeriesValue& o) const {
  return name == o.name && dtype == o.dtype && index == o.index && cells == o.cells && rows == o.rows;
}
bool TableValue::operator==(const TableValue& o) const {
  return columns == o.columns && dtypes == o.dtypes && index == o.index && data == o.data && rows == o.rows;
}

bool Value::operator==(const Value& other) const {
  if (type_name != other.type_name) return false;
  if (kind() == ValueKind::Float && other.kind() == ValueKind::Float) {
    double a = std::get<double>(data);
    double b = std::get<double>(other.data);
    return a == b || (std::isnan(a) && std::isnan(b));
  }
  return data == other.data;
}

double Value::as_double() const {
  switch (kind()) {
    case ValueKind::Int: return static_cast<double>(std::get<std::int64_t>(data));
    case ValueKind::Float: return std::get<double>(data);
    case ValueKind::Bool: return std::get<bool>(data) ? 1.0 : 0.0;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

namespace {

double number_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_object() && j.contains("inf")) {
    return j["inf"].get<int>() > 0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
  }
  return j.get<double>();
}

json number_to_json(double d) {
  if (std::isnan(d)) return nullptr;
  if (std::isinf(d)) return json{{"inf", d > 0 ? 1 : -1}};
  return d;
}

std::vector<Value> cells_from_json(const json& arr) {
  std::vector<Value> out;
  out.reserve(arr.size());
  for (const auto& c : arr) out.push_back(cell_from_json(c));
  return out;
}

json cells_to_json(const std::vector<Value>& cells);

json cell_to_json(const Value& v) {
  switch (v.kind()) {
    case ValueKind::None: return nullptr;
    case ValueKind::Bool: return std::get<bool>(v.data);
    case ValueKind::Int: return std::get<std::int64_t>(v.data);
    case ValueKind::Float: {
      double d = std::get<double>(v.data);
      if (std::isnan(d)) return nullptr;
      return number_to_json(d);
    }
    case ValueKind::Str: return std::get<StrValue>(v.data).text;
    case ValueKind::Seq: return json{{"tuple", cells_to_json(std::get<SeqValue>(v.data).items)}};
    default: return json{{"s", cell_text(v)}};
  }
}

json cells_to_json(const std::vector<Value>& cells) {
  json arr = json::array();
  for (const auto& c : cells) arr.push_back(cell_to_json(c));
  return arr;
}

RowIndex index_from_json(const json& j) {
  RowIndex idx;
  if (j.is_null()) return idx;
  for (const auto& n : j.value("names", json::array())) {
    idx.names.push_back(n.is_null() ? std::nullopt : std::optional<std::string>(n.get<std::string>()));
  }
  idx.labels = cells_from_json(j.value("values", json::array()));
  return idx;
}

json index_to_json(const RowIndex& idx) {
  json names = json::array();
  for (const auto& n : idx.names) names.push_back(n ? json(*n) : json(nullptr));
  return json{{"names", names}, {"values", cells_to_json(idx.labels)}};
}

}  // namespace

Value cell_from_json(const json& j) {
  if (j.is_null()) return Value::none();
  if (j.is_boolean()) return Value::boolean(j.get<bool>());
  if (j.is_number_integer()) return Value::integer(j.get<std::int64_t>());
  if (j.is_number()) return Value::real(j.get<double>());
  if (j.is_string()) return Value::str(j.get<std::string>());
  if (j.is_object()) {
    if (j.contains("inf")) return Value::real(number_from_json(j));
    if (j.contains("tuple")) return Value{SeqValue{SeqKind::Tuple, cells_from_json(j["tuple"])}, "tuple"};
    if (j.contains("s")) return Value{ObjectValue{j["s"].get<std::string>(), std::nullopt}, "object"};
  }
  throw std::runtime_error("unrecognized cell encoding: " + j.dump());
}

Value value_from_json(const json& j) {
  const std::string t = j.at("t").get<std::string>();
  Value v;
  if (t == "none") {
    v.data = NoneValue{};
  } else if (t == "bool") {
    v.data = j.at("v").get<bool>();
  } else if (t == "int") {
    v.data = j.at("v").get<std::int64_t>();
  } else if (t == "float") {
    v.data = number_from_json(j.at("v"));
  } else if (t == "str") {
    v.data = StrValue{j.at("v").get<std::string>()};
  } else if (t == "list" || t == "tuple" || t == "set") {
    SeqValue s;
    s.kind = t == "list" ? SeqKind::List : t == "tuple" ? SeqKind::Tuple : SeqKind::Set;
    for (const auto& item : j.at("items")) s.items.push_back(value_from_json(item));
    v.data = std::move(s);
  } else if (t == "dict") {
    DictValue d;
    for (const auto& kv : j.at("items")) {
      d.keys.push_back(value_from_json(kv.at(0)));
      d.values.push_back(value_from_json(kv.at(1)));
    }
    v.data = std::move(d);
  } else if (t == "array") {
    ArrayValue a;
    a.dtype = j.at("dtype").get<std::string>();
    a.shape = j.at("shape").get<std::vector<std::size_t>>();
    a.cells = cells_from_json(j.at("data"));
    v.data = std::move(a);
  } else if (t == "series") {
    SeriesValue s;
    if (!j.at("name").is_null()) s.name = j["name"].get<std::string>();
    s.dtype = j.at("dtype").get<std::string>();
    s.index = index_from_json(j.at("index"));
    s.cells = cells_from_json(j.at("data"));
    s.rows = j.value("rows", s.cells.size());
    s.nunique = j.value("nunique", std::int64_t{-1});
    v.data = std::move(s);
  } else if (t == "table") {
    TableValue tb;
    tb.columns = j.at("columns").get<std::vector<std::string>>();
    tb.dtypes = j.at("dtypes").get<std::vector<std::string>>();
    tb.index = index_from_json(j.at("index"));
    for (const auto& col : j.at("data")) tb.data.push_back(cells_from_json(col));
    tb.rows = j.value("rows", tb.data.empty() ? tb.index.labels.size() : tb.data.front().size());
    if (j.contains("nunique")) tb.nunique = j["nunique"].get<std::vector<std::int64_t>>();
    v.data = std::move(tb);
  } else if (t == "object") {
    ObjectValue o;
    o.text = j.value("text", "");
    if (j.contains("digest") && !j["digest"].is_null()) o.digest = j["digest"].get<std::string>();
    v.data = std::move(o);
  } else {
    throw std::runtime_error("unrecognized value encoding: " + t);
  }
  v.type_name = j.value("type", "");
  v.repr = j.value("repr", "");
  return v;
}

json value_to_json(const Value& v) {
  json j;
  switch (v.kind()) {
    case ValueKind::None: j["t"] = "none"; break;
    case ValueKind::Bool: j["t"] = "bool"; j["v"] = std::get<bool>(v.data); break;
    case ValueKind::Int: j["t"] = "int"; j["v"] = std::get<std::int64_t>(v.data); break;
    case ValueKind::Float: j["t"] = "float"; j["v"] = number_to_json(std::get<double>(v.data)); break;
    case ValueKind::Str: j["t"] = "str"; j["v"] = std::get<StrValue>(v.data).text; break;
    case ValueKind::Seq: {
      const auto& s = std::get<SeqValue>(v.data);
      j["t"] = s.kind == SeqKind::List ? "list" : s.kind == SeqKind::Tuple ? "tuple" : "set";
      j["items"] = json::array();
      for (const auto& item : s.items) j["items"].push_back(value_to_json(item));
      break;
    }
    case ValueKind::Dict: {
      const auto& d = std::get<DictValue>(v.data);
      j["t"] = "dict";
      j["items"] = json::array();
      for (std::size_t i = 0; i < d.keys.size(); ++i) {
        j["items"].push_back(json::array({value_to_json(d.keys[i]), value_to_json(d.values[i])}));
      }
      break;
    }
    case ValueKind::Array: {
      const auto& a = std::get<ArrayValue>(v.data);
      j["t"] = "array";
      j["dtype"] = a.dtype;
      j["shape"] = a.shape;
      j["data"] = cells_to_json(a.cells);
      break;
    }
    case ValueKind::Series: {
      const auto& s = std::get<SeriesValue>(v.data);
      j["t"] = "series";
      j["name"] = s.name ? json(*s.name) : json(nullptr);
      j["dtype"] = s.dtype;
      j["index"] = index_to_json(s.index);
      j["rows"] = s.rows;
      j["data"] = cells_to_json(s.cells);
      j["nunique"] = s.nunique;
      break;
    }
    case ValueKind::Table: {
      const auto& t = std::get<TableValue>(v.data);
      j["t"] = "table";
      j["columns"] = t.columns;
      j["dtypes"] = t.dtypes;
      j["index"] = index_to_json(t.index);
      j["rows"] = t.rows;
      j["data"] = json::array();
      for (const auto& col : t.data) j["data"].push_back(cells_to_json(col));
      j["nunique"] = t.nunique;
      break;
    }
    case ValueKind::Object: {
      const auto& o = std::get<ObjectValue>(v.data);
      j["t"] = "object";
      j["text"] = o.text;
      j["digest"] = o.digest ? json(*o.digest) : json(nullptr);
      break;
    }
  }
  j["type"] = v.type_name;
  if (!v.repr.empty()) j["repr"] = v.repr;
  return j;
}

std::string cell_text(const Value& v) {
  switch (v.kind()) {
    case ValueKind::None: return "None";
    case ValueKind::Bool: return std::get<bool>(v.data) ? "True" : "False";
    case ValueKind::Int: return std::to_string(std::get<std::int64_t>(v.data));
    case ValueKind::Float: {
      double d = std::get<double>(v.data);
      if (std::isnan(d)) return "nan";
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      std::ostringstream os;
      os.precision(12);
      os << d;
      return os.str();
    }
    case ValueKind::Str: return std::get<StrValue>(v.data).text;
    case ValueKind::Object: return std::get<ObjectValue>(v.data).text;
    case ValueKind::Seq: {
      const auto& s = std::get<SeqValue>(v.data);
      std::string out = s.kind == SeqKind::List ? "[" : s.kind == SeqKind::Tuple ? "(" : "{";
      for (std::size_t i = 0; i < s.items.size(); ++i) {
        if (i) out += ", ";
        out += cell_text(s.items[i]);
      }
      out += s.kind == SeqKind::List ? "]" : s.kind == SeqKind::Tuple ? ")" : "}";
      return out;
    }
    default: return v.repr.empty() ? "<" + v.type_name + ">" : v.repr;
  }
}

std::string kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::None: return "none";
    case ValueKind::Bool: return "bool";
    case ValueKind::Int: return "int";
    case ValueKind::Float: return "float";
    case ValueKind::Str: return "str";
    case ValueKind::Seq: return "sequence";
    case ValueKind::Dict: return "dict";
    case ValueKind::Array: return "array";
    case ValueKind::Series: return "series";
    case ValueKind::Table: return "table";
    case ValueKind::Object: return "object";
  }
  return "?";
}

}  // namespace dseval
