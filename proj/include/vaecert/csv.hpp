#pragma once

#include <string>
#include <vector>

namespace vaecert::io {

/// CSV with a versioned schema line: the first line is
/// "#schema,<name>,v<version>", the second the column header, then rows.
struct CsvTable {
  std::string schema;
  int version = 1;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::size_t column_index(const std::string& name) const;  // throws if missing
};

/// Deterministic serialization: numbers should already be formatted via
/// format_double so reruns produce byte-identical files.
std::string to_string(const CsvTable& table);
void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

/// Round-trip-exact double formatting ("%.17g").
std::string format_double(double v);

/// Throws std::runtime_error naming the first missing column.
void require_columns(const CsvTable& table, const std::vector<std::string>& names);

}  // namespace vaecert::io
