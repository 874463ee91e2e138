#include "gaitforge/csv.h"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gaitforge/types.h"

namespace gaitforge {

std::string FormatDouble(double value) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw std::runtime_error("FormatDouble failed");
  return std::string(buf.data(), end);
}

bool ParseDouble(std::string_view text, double* out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), *out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

int CsvTable::Column(std::string_view name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double CsvTable::Number(size_t row, int column) const {
  double v = 0.0;
  if (column < 0 || static_cast<size_t>(column) >= rows[row].size() ||
      !ParseDouble(rows[row][column], &v)) {
    const std::string col_name =
        column >= 0 && static_cast<size_t>(column) < header.size()
            ? header[column]
            : std::to_string(column);
    throw LoadError("row " + std::to_string(row + 1) + ", column '" +
                    col_name + "': not a number");
  }
  return v;
}

std::vector<double> CsvTable::NumericColumn(std::string_view name) const {
  const int c = Column(name);
  if (c < 0) throw LoadError("missing column '" + std::string(name) + "'");
  std::vector<double> out(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) out[r] = Number(r, c);
  return out;
}

CsvTable ParseCsv(std::string_view text, const std::string& origin) {
  CsvTable table;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      fields.emplace_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw LoadError(origin + ": line " + std::to_string(line_no) +
                      " has " + std::to_string(fields.size()) +
                      " fields, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw LoadError(origin + ": empty file");
  return table;
}

CsvTable ReadCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseCsv(buf.str(), path);
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header)
    : out_(out), columns_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

CsvWriter& CsvWriter::Add(double value) {
  if (filled_++) out_ << ',';
  out_ << FormatDouble(value);
  return *this;
}

CsvWriter& CsvWriter::Add(std::string_view text) {
  if (filled_++) out_ << ',';
  out_ << text;
  return *this;
}

CsvWriter& CsvWriter::Add(long long value) {
  if (filled_++) out_ << ',';
  out_ << value;
  return *this;
}

void CsvWriter::EndRow() {
  if (filled_ != columns_) {
    throw UsageError("csv row has " + std::to_string(filled_) +
                     " fields, expected " + std::to_string(columns_));
  }
  out_ << '\n';
  filled_ = 0;
}

}  // namespace gaitforge
