#include "bidsel/csv.hpp"

#include <charconv>

#include "bidsel/error.hpp"

namespace bidsel {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.is_open()) {
    throw ValidationError("cannot open '" + path.string() + "'");
  }
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      table.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    table.rows.push_back(split_csv_line(line));
    table.line_numbers.push_back(line_no);
  }
  table.empty_file = !have_header;
  return table;
}

double parse_csv_double(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::string& s = table.rows[row][col];
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    const std::string col_name =
        col < table.header.size() ? table.header[col] : std::to_string(col + 1);
    throw ValidationError("line " + std::to_string(table.line_numbers[row]) +
                          ", column '" + col_name + "': cannot parse '" + s +
                          "' as a number");
  }
  return v;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_.is_open()) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
}

void CsvWriter::comment(const std::string& text) { out_ << "# " << text << "\n"; }

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
}

}  // namespace bidsel
