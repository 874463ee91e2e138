#ifndef GAITFORGE_CSV_H_
#define GAITFORGE_CSV_H_

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace gaitforge {

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double value);

// Parses a full field as a double; false on any trailing garbage.
bool ParseDouble(std::string_view text, double* out);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index or -1.
  int Column(std::string_view name) const;
  // Numeric cell; throws LoadError naming the row (1-based data row) and
  // column on parse failure.
  double Number(size_t row, int column) const;
  std::vector<double> NumericColumn(std::string_view name) const;
};

// Reads a comma-separated file with a header row. Accepts LF or CRLF.
CsvTable ReadCsv(const std::string& path);
CsvTable ParseCsv(std::string_view text, const std::string& origin);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  CsvWriter& Add(double value);
  CsvWriter& Add(std::string_view text);
  CsvWriter& Add(long long value);
  CsvWriter& Add(int value) { return Add(static_cast<long long>(value)); }
  void EndRow();

 private:
  std::ostream& out_;
  size_t columns_;
  size_t filled_ = 0;
};

}  // namespace gaitforge

#endif  // GAITFORGE_CSV_H_
