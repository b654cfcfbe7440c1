#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace bidsel {

// Minimal CSV support for the file schemas this project reads and writes:
// comma-separated, no quoting, '#'-prefixed comment lines allowed before
// and after the header, decimal point, no thousands separators.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row
  bool empty_file = false;                // no header present at all
};

std::vector<std::string> split_csv_line(const std::string& line);

// Throws ValidationError on unreadable files.
CsvTable read_csv(const std::filesystem::path& path);

// Field accessor with row/column context in error messages.
double parse_csv_double(const CsvTable& table, std::size_t row, std::size_t col);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void comment(const std::string& text);  // writes "# text"
  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
};

}  // namespace bidsel
