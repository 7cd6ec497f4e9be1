#ifndef FAIRGEN_DATASET_HPP
#define FAIRGEN_DATASET_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fairgen/nn.hpp"
#include "fairgen/numerics.hpp"
#include "json.hpp"

namespace fairgen::data {

enum class ColumnKind { Numeric, Categorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> values;  // categorical only, declared order
  bool sensitive = false;
  bool label = false;

  std::optional<std::size_t> value_index(std::string_view v) const {
    auto it = std::find(values.begin(), values.end(), v);
    if (it == values.end()) return std::nullopt;
    return static_cast<std::size_t>(it - values.begin());
  }
  friend bool operator==(const Column&, const Column&) = default;
};

/// Column layout of a table. The label column is binary categorical and its
/// second declared value is the positive class.
struct Schema {
  std::vector<Column> columns;

  std::size_t size() const { return columns.size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return i;
    }
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ParameterError("schema has no column '" + std::string(name) + "'");
  }

  std::size_t label_index() const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].label) return i;
    }
    throw ParameterError("schema has no label column");
  }

  std::vector<std::size_t> sensitive_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].sensitive) out.push_back(i);
    }
    return out;
  }

  void validate() const {
    if (columns.empty()) throw ParameterError("schema has no columns");
    std::set<std::string> names;
    std::size_t labels = 0;
    for (const auto& c : columns) {
      if (c.name.empty()) throw ParameterError("schema column with empty name");
      if (!names.insert(c.name).second) throw ParameterError("duplicate schema column '" + c.name + "'");
      if (c.kind == ColumnKind::Categorical) {
        if (c.values.empty()) throw ParameterError("categorical column '" + c.name + "' has no values");
        std::set<std::string> seen(c.values.begin(), c.values.end());
        if (seen.size() != c.values.size()) {
          throw ParameterError("categorical column '" + c.name + "' has duplicate values");
        }
      } else if (!c.values.empty()) {
        throw ParameterError("numeric column '" + c.name + "' declares values");
      }
      if (c.sensitive && c.kind != ColumnKind::Categorical) {
        throw ParameterError("sensitive column '" + c.name + "' must be categorical");
      }
      if (c.label) {
        ++labels;
        if (c.kind != ColumnKind::Categorical || c.values.size() != 2) {
          throw ParameterError("label column '" + c.name + "' must be categorical with 2 values");
        }
        if (c.sensitive) throw ParameterError("label column '" + c.name + "' cannot be sensitive");
      }
    }
    if (labels != 1) {
      throw ParameterError("schema needs exactly one label column, found " + std::to_string(labels));
    }
  }

  nlohmann::json to_json() const {
    auto cols = nlohmann::json::array();
    for (const auto& c : columns) {
      nlohmann::json j{{"name", c.name},
                       {"kind", c.kind == ColumnKind::Numeric ? "numeric" : "categorical"},
                       {"sensitive", c.sensitive},
                       {"label", c.label}};
      if (c.kind == ColumnKind::Categorical) j["values"] = c.values;
      cols.push_back(std::move(j));
    }
    return {{"columns", std::move(cols)}};
  }

  static Schema from_json(const nlohmann::json& j) {
    Schema s;
    for (const auto& cj : j.at("columns")) {
      Column c;
      c.name = cj.at("name").get<std::string>();
      const auto kind = cj.at("kind").get<std::string>();
      if (kind == "numeric") {
        c.kind = ColumnKind::Numeric;
      } else if (kind == "categorical") {
        c.kind = ColumnKind::Categorical;
        c.values = cj.at("values").get<std::vector<std::string>>();
      } else {
        throw ParameterError("column '" + c.name + "' has unknown kind '" + kind + "'");
      }
      c.sensitive = cj.value("sensitive", false);
      c.label = cj.value("label", false);
      s.columns.push_back(std::move(c));
    }
    s.validate();
    return s;
  }

  /// Fingerprint of the canonical JSON form.
  std::string hash() const { return hex64(fnv1a64(to_json().dump())); }

  friend bool operator==(const Schema&, const Schema&) = default;
};

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("schema file '" + path + "' is not valid JSON: " + e.what());
  }
  return Schema::from_json(j);
}

struct Category {
  std::size_t index = 0;
  friend bool operator==(const Category&, const Category&) = default;
};

using Cell = std::variant<double, Category>;
using Row = std::vector<Cell>;

enum class Provenance { Original, Synthetic };

struct DatasetTable {
  Schema schema;
  std::vector<Row> rows;
  std::vector<Provenance> provenance;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  double numeric(std::size_t r, std::size_t c) const { return std::get<double>(rows[r][c]); }
  std::size_t category(std::size_t r, std::size_t c) const { return std::get<Category>(rows[r][c]).index; }

  /// 1 for the positive (second declared) label value.
  int label(std::size_t r) const { return static_cast<int>(category(r, schema.label_index())); }

  void push_back(Row row, Provenance p = Provenance::Original) {
    rows.push_back(std::move(row));
    provenance.push_back(p);
  }

  DatasetTable subset(const std::vector<std::size_t>& indices) const {
    DatasetTable t{schema, {}, {}};
    t.rows.reserve(indices.size());
    for (auto i : indices) t.push_back(rows[i], provenance[i]);
    return t;
  }

  friend bool operator==(const DatasetTable&, const DatasetTable&) = default;
};

// ---------------------------------------------------------------------------
// Group predicates

/// Conjunction of `sensitive column = value` terms. The empty conjunction
/// matches every row.
struct GroupPredicate {
  struct Term {
    std::size_t column = 0;
    std::size_t value = 0;
    friend auto operator<=>(const Term&, const Term&) = default;
  };
  std::vector<Term> terms;

  bool matches(const Row& row) const {
    return std::all_of(terms.begin(), terms.end(), [&](const Term& t) {
      return std::get<Category>(row[t.column]).index == t.value;
    });
  }

  /// Parses `col=value,col=value`. Every column must be sensitive and every
  /// value declared. Terms are kept sorted by column so equal predicates
  /// compare equal regardless of spelling order.
  static GroupPredicate parse(std::string_view text, const Schema& schema) {
    GroupPredicate p;
    std::string s(text);
    std::stringstream ss(s);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
      if (piece.empty()) continue;
      const auto eq = piece.find('=');
      if (eq == std::string::npos) {
        throw ParameterError("group term '" + piece + "' is not of the form column=value");
      }
      const std::string col = piece.substr(0, eq);
      const std::string val = piece.substr(eq + 1);
      const auto ci = schema.find(col);
      if (!ci) throw ParameterError("group term references unknown column '" + col + "'");
      const auto& column = schema.columns[*ci];
      if (!column.sensitive) {
        throw ParameterError("group term references non-sensitive column '" + col + "'");
      }
      const auto vi = column.value_index(val);
      if (!vi) throw ParameterError("value '" + val + "' is not declared for column '" + col + "'");
      for (const auto& t : p.terms) {
        if (t.column == *ci) throw ParameterError("column '" + col + "' appears twice in group");
      }
      p.terms.push_back({*ci, *vi});
    }
    std::sort(p.terms.begin(), p.terms.end());
    return p;
  }

  std::string to_string(const Schema& schema) const {
    std::string out;
    for (const auto& t : terms) {
      if (!out.empty()) out += ',';
      out += schema.columns[t.column].name + "=" + schema.columns[t.column].values[t.value];
    }
    return out;
  }

  friend bool operator==(const GroupPredicate&, const GroupPredicate&) = default;
  friend auto operator<=>(const GroupPredicate&, const GroupPredicate&) = default;
};

inline std::vector<std::size_t> group_rows(const DatasetTable& table, const GroupPredicate& group) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (group.matches(table.rows[r])) out.push_back(r);
  }
  return out;
}

inline std::size_t group_count(const DatasetTable& table, const GroupPredicate& group) {
  std::size_t n = 0;
  for (const auto& row : table.rows) n += group.matches(row) ? 1 : 0;
  return n;
}

/// Every single-term group: one per declared value of each sensitive column.
inline std::vector<GroupPredicate> single_attribute_groups(const Schema& schema) {
  std::vector<GroupPredicate> out;
  for (auto c : schema.sensitive_indices()) {
    for (std::size_t v = 0; v < schema.columns[c].values.size(); ++v) {
      out.push_back(GroupPredicate{{{c, v}}});
    }
  }
  return out;
}

struct AugmentationEntry {
  GroupPredicate group;
  double fraction = 0.0;
};

struct AugmentationPlan {
  std::vector<AugmentationEntry> entries;
};

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal form that parses back to the same double.
inline std::string format_real(double v) {
  if (v == 0.0) return "0";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

/// Reads one RFC-4180 record. Returns false at end of input. `line` is
/// advanced past every physical line consumed.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c = 0;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      ++line;
      break;
    } else if (c == '\n') {
      ++line;
      break;
    } else {
      field += c;
    }
  }
  if (quoted) throw IngestionError("line " + std::to_string(line) + ": unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

}  // namespace detail

struct CsvOptions {
  /// Drop malformed rows (recording them) instead of failing on the first.
  bool skip_invalid = false;
  /// Strip blanks around every field (the raw Adult files pad with spaces).
  bool trim_fields = false;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

inline constexpr const char* kProvenanceColumn = "provenance";

/// Parses CSV text with a header row matching the schema's column names, in
/// order. A trailing `provenance` column (original|synthetic) is accepted.
inline DatasetTable read_csv(std::istream& in, const Schema& schema, const CsvOptions& opts = {},
                             std::vector<RejectedRow>* rejected = nullptr) {
  schema.validate();
  std::size_t line = 1;
  std::vector<std::string> fields;
  if (!detail::read_csv_record(in, fields, line)) throw IngestionError("no header row");
  if (opts.trim_fields) {
    for (auto& f : fields) f = detail::trim(f);
  }
  if (!fields.empty() && !fields.front().empty() && fields.front().rfind("\xEF\xBB\xBF", 0) == 0) {
    fields.front().erase(0, 3);
  }
  bool has_provenance = false;
  if (fields.size() == schema.size() + 1 && fields.back() == kProvenanceColumn) {
    has_provenance = true;
    fields.pop_back();
  }
  if (fields.size() != schema.size()) {
    throw IngestionError("header has " + std::to_string(fields.size()) + " columns, schema declares " +
                         std::to_string(schema.size()));
  }
  for (std::size_t c = 0; c < fields.size(); ++c) {
    if (fields[c] != schema.columns[c].name) {
      throw IngestionError("header column " + std::to_string(c + 1) + " is '" + fields[c] +
                           "', schema expects '" + schema.columns[c].name + "'");
    }
  }

  DatasetTable table{schema, {}, {}};
  const std::size_t expected = schema.size() + (has_provenance ? 1 : 0);
  while (true) {
    const std::size_t record_line = line;
    if (!detail::read_csv_record(in, fields, line)) break;
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;  // blank line
    try {
      if (opts.trim_fields) {
        for (auto& f : fields) f = detail::trim(f);
      }
      if (fields.size() != expected) {
        throw IngestionError("line " + std::to_string(record_line) + ": expected " +
                             std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
      }
      Row row;
      row.reserve(schema.size());
      for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& col = schema.columns[c];
        if (col.kind == ColumnKind::Numeric) {
          auto v = parse_real(fields[c]);
          if (!v) {
            throw IngestionError("line " + std::to_string(record_line) + ": column '" + col.name +
                                 "' has non-numeric value '" + fields[c] + "'");
          }
          row.emplace_back(*v);
        } else {
          auto idx = col.value_index(fields[c]);
          if (!idx) {
            throw IngestionError("line " + std::to_string(record_line) + ": column '" + col.name +
                                 "' has undeclared value '" + fields[c] + "'");
          }
          row.emplace_back(Category{*idx});
        }
      }
      Provenance p = Provenance::Original;
      if (has_provenance) {
        const auto& tag = fields.back();
        if (tag == "synthetic") {
          p = Provenance::Synthetic;
        } else if (tag != "original") {
          throw IngestionError("line " + std::to_string(record_line) + ": provenance '" + tag +
                               "' is neither original nor synthetic");
        }
      }
      table.push_back(std::move(row), p);
    } catch (const IngestionError& e) {
      if (!opts.skip_invalid) throw;
      if (rejected) rejected->push_back({record_line, e.what()});
    }
  }
  if (table.empty()) throw IngestionError("no rows");
  return table;
}

inline DatasetTable load_csv(const std::string& path, const Schema& schema, const CsvOptions& opts = {},
                             std::vector<RejectedRow>* rejected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open data file '" + path + "'");
  return read_csv(in, schema, opts, rejected);
}

inline std::string cell_to_string(const Column& col, const Cell& cell) {
  if (col.kind == ColumnKind::Numeric) return format_real(std::get<double>(cell));
  return col.values[std::get<Category>(cell).index];
}

/// Writes the header and every row. With `provenance` a trailing column tags
/// each row original or synthetic.
inline void write_csv(std::ostream& out, const DatasetTable& table, bool provenance) {
  const auto& cols = table.schema.columns;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(cols[c].name);
  }
  if (provenance) out << ',' << kProvenanceColumn;
  out << '\n';
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      out << csv_escape(cell_to_string(cols[c], table.rows[r][c]));
    }
    if (provenance) {
      out << ',' << (table.provenance[r] == Provenance::Synthetic ? "synthetic" : "original");
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Encoding

struct NumericBounds {
  double lo = 0.0;
  double hi = 0.0;
};

enum class ColumnSet {
  All,          // every column
  Features,     // every column except the label
  NonSensitive  // features and label, without sensitive columns
};

inline std::vector<std::size_t> select_columns(const Schema& schema, ColumnSet set) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema.columns[c];
    if (set == ColumnSet::Features && col.label) continue;
    if (set == ColumnSet::NonSensitive && col.sensitive) continue;
    out.push_back(c);
  }
  return out;
}

/// Maps rows to dense vectors: selected numeric columns first (min-max scaled
/// with bounds fitted on the training split), then one one-hot block per
/// selected categorical column, both in schema order.
class TableEncoder {
public:
  TableEncoder() = default;

  static TableEncoder fit(const DatasetTable& table, const std::vector<std::size_t>& columns) {
    if (table.empty()) throw ParameterError("cannot fit encoder on an empty table");
    TableEncoder enc;
    enc.schema_ = table.schema;
    for (auto c : columns) {
      if (c >= table.schema.size()) throw ParameterError("encoder column out of range");
      if (table.schema.columns[c].kind == ColumnKind::Numeric) {
        enc.numeric_.push_back(c);
      } else {
        enc.categorical_.push_back(c);
      }
    }
    for (auto c : enc.numeric_) {
      NumericBounds b{INFINITY, -INFINITY};
      for (std::size_t r = 0; r < table.size(); ++r) {
        const double v = table.numeric(r, c);
        b.lo = std::min(b.lo, v);
        b.hi = std::max(b.hi, v);
      }
      if (b.hi == b.lo) {
        enc.warnings_.push_back("numeric column '" + table.schema.columns[c].name +
                                "' is constant; it encodes to 0");
      }
      enc.bounds_.push_back(b);
    }
    return enc;
  }

  static TableEncoder fit(const DatasetTable& table, ColumnSet set) {
    return fit(table, select_columns(table.schema, set));
  }

  const Schema& schema() const { return schema_; }
  const std::vector<std::size_t>& numeric_columns() const { return numeric_; }
  const std::vector<std::size_t>& categorical_columns() const { return categorical_; }
  const std::vector<NumericBounds>& bounds() const { return bounds_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::size_t numeric_width() const { return numeric_.size(); }
  std::size_t width() const {
    std::size_t w = numeric_.size();
    for (auto c : categorical_) w += schema_.columns[c].values.size();
    return w;
  }

  /// Generator head matching this layout.
  nn::MixedTabularHead mixed_head(double temperature) const {
    nn::MixedTabularHead h;
    h.numeric_width = numeric_.size();
    h.temperature = temperature;
    for (auto c : categorical_) {
      h.categorical_blocks.push_back({schema_.columns[c].name, schema_.columns[c].values.size()});
    }
    return h;
  }

  void encode_row(const Row& row, std::span<double> out) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < numeric_.size(); ++i) {
      const auto& b = bounds_[i];
      const double v = std::get<double>(row[numeric_[i]]);
      out[k++] = b.hi > b.lo ? (v - b.lo) / (b.hi - b.lo) : 0.0;
    }
    for (auto c : categorical_) {
      const std::size_t card = schema_.columns[c].values.size();
      const std::size_t idx = std::get<Category>(row[c]).index;
      for (std::size_t v = 0; v < card; ++v) out[k + v] = v == idx ? 1.0 : 0.0;
      k += card;
    }
  }

  Matrix encode(const DatasetTable& table) const {
    if (!(table.schema == schema_)) throw ShapeError("encode: table schema differs from encoder schema");
    Matrix m(table.size(), width());
    for (std::size_t r = 0; r < table.size(); ++r) encode_row(table.rows[r], m.row(r));
    return m;
  }

  /// Writes decoded values of the encoded columns into `row` (which must
  /// already have one cell per schema column). Categorical blocks decode by
  /// argmax; `clamp` limits scaled numerics to [0, 1] first.
  void decode_row(std::span<const double> encoded, Row& row, bool clamp = false) const {
    if (encoded.size() != width()) throw ShapeError("decode: encoded width mismatch");
    std::size_t k = 0;
    for (std::size_t i = 0; i < numeric_.size(); ++i) {
      const auto& b = bounds_[i];
      double s = encoded[k++];
      if (clamp) s = std::clamp(s, 0.0, 1.0);
      row[numeric_[i]] = b.hi > b.lo ? s * (b.hi - b.lo) + b.lo : b.lo;
    }
    for (auto c : categorical_) {
      const std::size_t card = schema_.columns[c].values.size();
      std::size_t best = 0;
      for (std::size_t v = 1; v < card; ++v) {
        if (encoded[k + v] > encoded[k + best]) best = v;
      }
      row[c] = Category{best};
      k += card;
    }
  }

  /// Inverse of encode for tables whose encoder covers every column.
  DatasetTable decode(const Matrix& encoded, bool clamp = false) const {
    if (numeric_.size() + categorical_.size() != schema_.size()) {
      throw UsageError("decode: encoder does not cover every column; use decode_row with a base row");
    }
    DatasetTable t{schema_, {}, {}};
    for (std::size_t r = 0; r < encoded.rows(); ++r) {
      Row row(schema_.size(), Cell{0.0});
      decode_row(encoded.row(r), row, clamp);
      t.push_back(std::move(row));
    }
    return t;
  }

  nlohmann::json to_json() const {
    auto bounds = nlohmann::json::array();
    for (std::size_t i = 0; i < numeric_.size(); ++i) {
      bounds.push_back({{"column", schema_.columns[numeric_[i]].name},
                        {"lo", bounds_[i].lo},
                        {"hi", bounds_[i].hi}});
    }
    std::vector<std::string> cats;
    for (auto c : categorical_) cats.push_back(schema_.columns[c].name);
    return {{"numeric", std::move(bounds)}, {"categorical", cats}};
  }

  static TableEncoder from_json(const nlohmann::json& j, const Schema& schema) {
    TableEncoder enc;
    enc.schema_ = schema;
    for (const auto& b : j.at("numeric")) {
      enc.numeric_.push_back(schema.index_of(b.at("column").get<std::string>()));
      enc.bounds_.push_back({b.at("lo").get<double>(), b.at("hi").get<double>()});
    }
    for (const auto& name : j.at("categorical")) {
      enc.categorical_.push_back(schema.index_of(name.get<std::string>()));
    }
    return enc;
  }

private:
  Schema schema_;
  std::vector<std::size_t> numeric_;
  std::vector<std::size_t> categorical_;
  std::vector<NumericBounds> bounds_;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Splitting and augmentation

struct Split {
  DatasetTable train;
  DatasetTable validation;
  DatasetTable test;
};

/// Stratified, seed-deterministic three-way partition. Part sizes are
/// round(f * n) for train and validation with test taking the remainder;
/// rows are dealt class by class to whichever part is furthest behind its
/// quota, so each part keeps the label mix.
inline Split split(const DatasetTable& table, std::array<double, 3> fractions, SeededRng& rng) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ParameterError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1");
  const std::size_t n = table.size();
  std::array<std::size_t, 3> target{};
  target[0] = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  target[1] = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
  if (target[0] + target[1] > n) throw ParameterError("split: table too small for fractions");
  target[2] = n - target[0] - target[1];
  for (std::size_t p = 0; p < 3; ++p) {
    if (target[p] == 0) {
      throw ParameterError("split: part " + std::to_string(p) + " would be empty for " +
                           std::to_string(n) + " rows");
    }
  }

  const std::size_t label = table.schema.label_index();
  const std::size_t classes = table.schema.columns[label].values.size();
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < n; ++r) {
      if (table.category(r, label) == k) members.push_back(r);
    }
    rng.shuffle(members);
    order.insert(order.end(), members.begin(), members.end());
  }

  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = 0;
    double best_deficit = -INFINITY;
    for (std::size_t p = 0; p < 3; ++p) {
      if (parts[p].size() >= target[p]) continue;
      const double quota = static_cast<double>(target[p]) * static_cast<double>(k + 1) / static_cast<double>(n);
      const double deficit = quota - static_cast<double>(parts[p].size());
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = p;
      }
    }
    parts[best].push_back(order[k]);
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return {table.subset(parts[0]), table.subset(parts[1]), table.subset(parts[2])};
}

inline std::size_t augmentation_count(double fraction, std::size_t group_size) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(group_size)));
}

/// Appends round(fraction * N_g) synthetic rows per plan entry, where N_g is
/// the number of original rows matching the entry's group. Synthetic rows are
/// taken in pool order and never reused across entries.
inline DatasetTable augment(const DatasetTable& table, const DatasetTable& synthetic,
                            const AugmentationPlan& plan) {
  if (!(table.schema == synthetic.schema)) throw ShapeError("augment: schemas differ");
  for (auto p : synthetic.provenance) {
    if (p != Provenance::Synthetic) throw ParameterError("augment: pool contains rows not tagged synthetic");
  }
  DatasetTable out = table;
  std::vector<bool> used(synthetic.size(), false);
  for (const auto& entry : plan.entries) {
    if (!(entry.fraction >= 0.0) || !std::isfinite(entry.fraction)) {
      throw ParameterError("augment: fraction must be finite and non-negative");
    }
    std::size_t originals = 0;
    for (std::size_t r = 0; r < table.size(); ++r) {
      if (table.provenance[r] == Provenance::Original && entry.group.matches(table.rows[r])) ++originals;
    }
    const std::size_t need = augmentation_count(entry.fraction, originals);
    std::size_t taken = 0;
    for (std::size_t s = 0; s < synthetic.size() && taken < need; ++s) {
      if (used[s] || !entry.group.matches(synthetic.rows[s])) continue;
      used[s] = true;
      out.push_back(synthetic.rows[s], Provenance::Synthetic);
      ++taken;
    }
    if (taken < need) {
      throw ParameterError("augment: group '" + entry.group.to_string(table.schema) + "' needs " +
                           std::to_string(need) + " synthetic rows but the pool has " +
                           std::to_string(taken) + " (shortfall " + std::to_string(need - taken) + ")");
    }
  }
  return out;
}

}  // namespace fairgen::data

#endif  // FAIRGEN_DATASET_HPP
