#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdb {

enum class ColumnKind { Numeric, Ordinal, Nominal };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> levels;  // categorical only, in code order
  double min = 0.0;                 // numeric only
  double max = 0.0;

  bool categorical() const { return kind != ColumnKind::Numeric; }
  // Ordinal codes are regressed as plain numbers.
  bool regressed_as_numeric() const { return kind != ColumnKind::Nominal; }
  std::optional<int> level_code(std::string_view level) const;

  bool operator==(const ColumnSchema&) const = default;
};

/// One typed column. Categorical cells hold their level code (0..L-1);
/// numeric cells hold the value. `text` optionally keeps the original
/// spelling of numeric cells so unchanged columns write back verbatim.
class Column {
 public:
  Column() = default;
  Column(ColumnSchema schema, std::vector<double> values,
         std::vector<std::string> text = {});

  static Column numeric(std::string name, std::vector<double> values);
  static Column categorical(std::string name, ColumnKind kind,
                            std::vector<std::string> levels,
                            std::vector<int> codes);

  const ColumnSchema& schema() const { return schema_; }
  const std::string& name() const { return schema_.name; }
  ColumnKind kind() const { return schema_.kind; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t row) const { return values_[row]; }
  int code(std::size_t row) const { return static_cast<int>(values_[row]); }
  std::size_t size() const { return values_.size(); }
  std::size_t level_count() const { return schema_.levels.size(); }

  /// Cell as it appears in CSV output.
  std::string cell_text(std::size_t row) const;
  bool has_source_text() const { return !text_.empty(); }

  bool operator==(const Column& other) const {
    return schema_ == other.schema_ && values_ == other.values_;
  }

 private:
  ColumnSchema schema_;
  std::vector<double> values_;
  std::vector<std::string> text_;
};

/// Immutable typed table with one binary label column.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Column> columns, std::string label,
          std::optional<std::string> favorable = std::nullopt,
          std::uint64_t seed = 0);

  std::size_t rows() const { return columns_.empty() ? 0 : columns_[0].size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  const Column& column(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool has_column(std::string_view name) const { return index_of(name).has_value(); }
  std::vector<std::string> column_names() const;

  const std::string& label() const { return label_; }
  const Column& label_column() const { return column(label_); }
  int favorable_code() const { return favorable_code_; }
  const std::string& favorable_level() const;
  std::uint64_t seed() const { return seed_; }

  std::size_t dropped_rows() const { return dropped_rows_; }
  void set_dropped_rows(std::size_t n) { dropped_rows_ = n; }
  const std::string& line_ending() const { return line_ending_; }
  void set_line_ending(std::string eol) { line_ending_ = std::move(eol); }

  /// Copy with column `name` replaced; schema must keep its name.
  Dataset with_column(const Column& replacement) const;

  bool operator==(const Dataset& other) const {
    return columns_ == other.columns_ && label_ == other.label_ &&
           favorable_code_ == other.favorable_code_;
  }

 private:
  std::vector<Column> columns_;
  std::string label_;
  int favorable_code_ = 1;
  std::uint64_t seed_ = 0;
  std::size_t dropped_rows_ = 0;
  std::string line_ending_ = "\n";
};

struct CsvOptions {
  std::string label;
  std::vector<std::string> nominal;
  std::vector<std::string> ordinal;
  std::optional<std::string> favorable;
  std::uint64_t seed = 0;
};

/// RFC-4180 ingestion. Columns not declared nominal/ordinal become numeric
/// when every cell parses as a number, nominal otherwise. Levels are kept in
/// first-occurrence order (ordinal levels that are all numbers are sorted
/// numerically). Rows with any missing cell are dropped and counted.
Dataset load_csv(std::string_view bytes, const CsvOptions& options);
Dataset load_csv_file(const std::string& path, const CsvOptions& options);

/// Parses a CSV with the schema (kinds and level codes) of `reference`,
/// so codes line up across datasets. Unknown levels raise SchemaError.
Dataset load_csv_like(std::string_view bytes, const Dataset& reference);

std::string write_csv(const Dataset& data);
void write_csv(const Dataset& data, std::ostream& out);

/// Splits RFC-4180 text into records of fields.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view bytes);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;
};

/// Z-scores with the population standard deviation.
Standardized standardize(std::span<const double> column);

double mean_of(std::span<const double> values);
/// Population standard deviation (divides by n).
double population_std(std::span<const double> values);

}  // namespace cdb
