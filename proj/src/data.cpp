#include "causaldebias/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "causaldebias/errors.hpp"

namespace cdb {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Ordinal: return "ordinal";
    case ColumnKind::Nominal: return "nominal";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(std::string_view text) {
  if (text == "numeric") return ColumnKind::Numeric;
  if (text == "ordinal") return ColumnKind::Ordinal;
  if (text == "nominal" || text == "categorical") return ColumnKind::Nominal;
  throw SchemaError("unknown column kind '" + std::string(text) + "'");
}

std::optional<int> ColumnSchema::level_code(std::string_view level) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return static_cast<int>(i);
  return std::nullopt;
}

// ---------------------------------------------------------------- Column

Column::Column(ColumnSchema schema, std::vector<double> values,
               std::vector<std::string> text)
    : schema_(std::move(schema)), values_(std::move(values)), text_(std::move(text)) {
  if (!text_.empty() && text_.size() != values_.size())
    throw SchemaError("column '" + schema_.name + "': text/value length mismatch");
  if (schema_.categorical()) {
    const double levels = static_cast<double>(schema_.levels.size());
    for (double v : values_)
      if (v < 0 || v >= levels || v != std::floor(v))
        throw SchemaError("column '" + schema_.name + "': level code out of range");
  } else if (!values_.empty()) {
    auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    schema_.min = *lo;
    schema_.max = *hi;
  }
}

Column Column::numeric(std::string name, std::vector<double> values) {
  ColumnSchema schema;
  schema.name = std::move(name);
  schema.kind = ColumnKind::Numeric;
  return Column(std::move(schema), std::move(values));
}

Column Column::categorical(std::string name, ColumnKind kind,
                           std::vector<std::string> levels,
                           std::vector<int> codes) {
  if (kind == ColumnKind::Numeric)
    throw SchemaError("categorical column '" + name + "' declared numeric");
  ColumnSchema schema;
  schema.name = std::move(name);
  schema.kind = kind;
  schema.levels = std::move(levels);
  std::vector<double> values(codes.begin(), codes.end());
  return Column(std::move(schema), std::move(values));
}

std::string Column::cell_text(std::size_t row) const {
  if (schema_.categorical()) return schema_.levels[code(row)];
  if (!text_.empty()) return text_[row];
  return format_number(values_[row]);
}

// ---------------------------------------------------------------- Dataset

namespace {

int pick_favorable(const ColumnSchema& label, const std::optional<std::string>& favorable) {
  if (favorable) {
    auto code = label.level_code(*favorable);
    if (!code)
      throw SchemaError("favorable level '" + *favorable + "' not present in label '" +
                        label.name + "'");
    return *code;
  }
  static const std::set<std::string> positive = {
      "1", "Y", "y", "Yes", "yes", "YES", "true", "True", "TRUE",
      ">50K", ">50K.", ">50k", "positive", "Positive"};
  for (std::size_t i = 0; i < label.levels.size(); ++i)
    if (positive.count(label.levels[i])) return static_cast<int>(i);
  return static_cast<int>(label.levels.size()) - 1;
}

}  // namespace

Dataset::Dataset(std::vector<Column> columns, std::string label,
                 std::optional<std::string> favorable, std::uint64_t seed)
    : columns_(std::move(columns)), label_(std::move(label)), seed_(seed) {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.name()).second)
      throw SchemaError("duplicate column name '" + c.name() + "'");
    if (c.size() != columns_.front().size())
      throw SchemaError("column '" + c.name() + "' has a different row count");
    if (c.schema().categorical() && c.level_count() < 2 && c.name() != label_)
      throw SchemaError("categorical column '" + c.name() + "' needs at least 2 levels");
  }
  auto idx = index_of(label_);
  if (!idx) throw SchemaError("label column '" + label_ + "' not found");
  const Column& lab = columns_[*idx];
  if (!lab.schema().categorical() || lab.level_count() != 2)
    throw LabelArityError("label column '" + label_ + "' must be binary categorical, has " +
                          std::to_string(lab.schema().categorical() ? lab.level_count() : 0) +
                          " levels");
  favorable_code_ = pick_favorable(lab.schema(), favorable);
}

const Column& Dataset::column(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw SchemaError("unknown column '" + std::string(name) + "'");
  return columns_[*idx];
}

std::optional<std::size_t> Dataset::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name() == name) return i;
  return std::nullopt;
}

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name());
  return out;
}

const std::string& Dataset::favorable_level() const {
  return label_column().schema().levels[favorable_code_];
}

Dataset Dataset::with_column(const Column& replacement) const {
  auto idx = index_of(replacement.name());
  if (!idx) throw SchemaError("unknown column '" + replacement.name() + "'");
  if (replacement.size() != rows())
    throw SchemaError("replacement column '" + replacement.name() + "' has wrong length");
  Dataset out = *this;
  out.columns_[*idx] = replacement;
  return out;
}

// ---------------------------------------------------------------- CSV

std::vector<std::vector<std::string>> parse_csv_records(std::string_view bytes) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (bytes.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A lone empty field is a blank line.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (; i < bytes.size(); ++i) {
    const char c = bytes[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < bytes.size() && bytes[i + 1] == '\n') ++i;
      end_record();
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw IngestError("unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view cell) {
  auto t = trim(cell);
  return t.empty() || t == "NA" || t == "?";
}

std::optional<double> parse_number(std::string_view cell) {
  auto t = trim(cell);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  if (t.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::string detect_line_ending(std::string_view bytes) {
  auto pos = bytes.find('\n');
  if (pos != std::string_view::npos && pos > 0 && bytes[pos - 1] == '\r') return "\r\n";
  return "\n";
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // complete rows only
  std::size_t dropped = 0;
};

Table read_table(std::string_view bytes) {
  auto records = parse_csv_records(bytes);
  if (records.empty()) throw IngestError("empty CSV input");
  Table t;
  t.header = std::move(records.front());
  std::set<std::string> seen;
  for (const auto& h : t.header)
    if (!seen.insert(h).second) throw SchemaError("duplicate header '" + h + "'");
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.size() != t.header.size())
      throw IngestError("row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                        " fields, header has " + std::to_string(t.header.size()));
    if (std::any_of(rec.begin(), rec.end(), [](const std::string& c) { return is_missing(c); })) {
      ++t.dropped;
      continue;
    }
    t.rows.push_back(std::move(rec));
  }
  if (t.rows.empty()) throw IngestError("CSV has no complete data rows");
  return t;
}

Column build_categorical(const std::string& name, ColumnKind kind,
                         const std::vector<std::vector<std::string>>& rows, std::size_t col) {
  std::vector<std::string> levels;
  std::unordered_map<std::string, int> index;
  for (const auto& row : rows) {
    if (index.emplace(row[col], static_cast<int>(levels.size())).second)
      levels.push_back(row[col]);
  }
  if (kind == ColumnKind::Ordinal) {
    std::vector<std::pair<double, std::string>> numeric;
    for (const auto& l : levels) {
      auto v = parse_number(l);
      if (!v) {
        numeric.clear();
        break;
      }
      numeric.emplace_back(*v, l);
    }
    if (!numeric.empty()) {
      std::stable_sort(numeric.begin(), numeric.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        levels[i] = numeric[i].second;
        index[levels[i]] = static_cast<int>(i);
      }
    }
  }
  std::vector<int> codes;
  codes.reserve(rows.size());
  for (const auto& row : rows) codes.push_back(index.at(row[col]));
  return Column::categorical(name, kind, std::move(levels), std::move(codes));
}

}  // namespace

Dataset load_csv(std::string_view bytes, const CsvOptions& options) {
  Table t = read_table(bytes);
  auto has = [&](const std::string& name) {
    return std::find(t.header.begin(), t.header.end(), name) != t.header.end();
  };
  if (!has(options.label)) throw SchemaError("unknown label column '" + options.label + "'");
  for (const auto& n : options.nominal)
    if (!has(n)) throw SchemaError("unknown nominal column '" + n + "'");
  for (const auto& n : options.ordinal)
    if (!has(n)) throw SchemaError("unknown ordinal column '" + n + "'");
  for (const auto& n : options.ordinal)
    if (std::find(options.nominal.begin(), options.nominal.end(), n) != options.nominal.end())
      throw SchemaError("column '" + n + "' declared both nominal and ordinal");

  std::vector<Column> columns;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string& name = t.header[c];
    const bool nominal = name == options.label ||
        std::find(options.nominal.begin(), options.nominal.end(), name) != options.nominal.end();
    const bool ordinal =
        std::find(options.ordinal.begin(), options.ordinal.end(), name) != options.ordinal.end();
    if (nominal || ordinal) {
      columns.push_back(build_categorical(name, ordinal ? ColumnKind::Ordinal : ColumnKind::Nominal,
                                          t.rows, c));
      continue;
    }
    std::vector<double> values;
    std::vector<std::string> text;
    values.reserve(t.rows.size());
    bool numeric = true;
    for (const auto& row : t.rows) {
      auto v = parse_number(row[c]);
      if (!v) {
        numeric = false;
        break;
      }
      values.push_back(*v);
      text.push_back(row[c]);
    }
    if (numeric) {
      ColumnSchema schema;
      schema.name = name;
      columns.emplace_back(std::move(schema), std::move(values), std::move(text));
    } else {
      columns.push_back(build_categorical(name, ColumnKind::Nominal, t.rows, c));
    }
  }
  const Column* label = nullptr;
  for (const auto& col : columns)
    if (col.name() == options.label) label = &col;
  if (label->level_count() != 2)
    throw LabelArityError("label column '" + options.label + "' has " +
                          std::to_string(label->level_count()) + " levels, expected 2");
  Dataset out(std::move(columns), options.label, options.favorable, options.seed);
  out.set_dropped_rows(t.dropped);
  out.set_line_ending(detect_line_ending(bytes));
  return out;
}

Dataset load_csv_file(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_csv(ss.str(), options);
}

Dataset load_csv_like(std::string_view bytes, const Dataset& reference) {
  Table t = read_table(bytes);
  if (t.header != reference.column_names())
    throw SchemaError("CSV header does not match the reference schema");
  std::vector<Column> columns;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const ColumnSchema& ref = reference.column(c).schema();
    if (ref.categorical()) {
      std::vector<int> codes;
      codes.reserve(t.rows.size());
      for (const auto& row : t.rows) {
        auto code = ref.level_code(row[c]);
        if (!code)
          throw SchemaError("column '" + ref.name + "': unknown level '" + row[c] + "'");
        codes.push_back(*code);
      }
      columns.push_back(Column::categorical(ref.name, ref.kind, ref.levels, std::move(codes)));
    } else {
      std::vector<double> values;
      std::vector<std::string> text;
      for (const auto& row : t.rows) {
        auto v = parse_number(row[c]);
        if (!v) throw SchemaError("column '" + ref.name + "': non-numeric cell '" + row[c] + "'");
        values.push_back(*v);
        text.push_back(row[c]);
      }
      ColumnSchema schema;
      schema.name = ref.name;
      columns.emplace_back(std::move(schema), std::move(values), std::move(text));
    }
  }
  Dataset out(std::move(columns), reference.label(), reference.favorable_level(),
              reference.seed());
  out.set_dropped_rows(t.dropped);
  out.set_line_ending(detect_line_ending(bytes));
  return out;
}

namespace {

void write_field(std::ostream& out, const std::string& field) {
  const bool quote = field.find_first_of(",\"\r\n") != std::string::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!quote) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

void write_csv(const Dataset& data, std::ostream& out) {
  const std::string& eol = data.line_ending();
  for (std::size_t c = 0; c < data.cols(); ++c) {
    if (c) out << ',';
    write_field(out, data.column(c).name());
  }
  out << eol;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) {
      if (c) out << ',';
      write_field(out, data.column(c).cell_text(r));
    }
    out << eol;
  }
}

std::string write_csv(const Dataset& data) {
  std::ostringstream ss;
  write_csv(data, ss);
  return ss.str();
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------- stats

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

Standardized standardize(std::span<const double> column) {
  Standardized out;
  out.mean = mean_of(column);
  out.std = population_std(column);
  if (!(out.std > 0.0) || out.std < 1e-300)
    throw DegenerateColumnError("cannot standardize a constant column");
  out.values.reserve(column.size());
  for (double v : column) out.values.push_back((v - out.mean) / out.std);
  return out;
}

}  // namespace cdb
