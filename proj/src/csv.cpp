#include "vaecert/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vaecert::io {

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("CsvTable: row width mismatch");
  rows.push_back(std::move(row));
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::runtime_error("csv: missing column '" + name + "' in schema " + schema);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::string to_string(const CsvTable& table) {
  std::ostringstream out;
  out << "#schema," << table.schema << ",v" << table.version << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out << ",";
    out << table.columns[i];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      out << row[i];
    }
    out << "\n";
  }
  return out.str();
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << to_string(table);
}

CsvTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  if (line.rfind("#schema,", 0) != 0) throw std::runtime_error("csv: missing schema line");
  const std::vector<std::string> head = split_line(line);
  if (head.size() != 3 || head[2].empty() || head[2][0] != 'v') {
    throw std::runtime_error("csv: malformed schema line");
  }
  table.schema = head[1];
  table.version = std::stoi(head[2].substr(1));
  if (!std::getline(in, line)) throw std::runtime_error("csv: missing header row");
  table.columns = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row = split_line(line);
    if (row.size() != table.columns.size()) throw std::runtime_error("csv: ragged row");
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

void require_columns(const CsvTable& table, const std::vector<std::string>& names) {
  for (const std::string& n : names) (void)table.column_index(n);
}

}  // namespace vaecert::io
