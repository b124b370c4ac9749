#include "mfkit/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "mfkit/errors.hpp"

namespace mfkit {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

std::string render(const CsvCell& cell) {
  if (std::holds_alternative<long long>(cell)) return std::to_string(std::get<long long>(cell));
  if (std::holds_alternative<double>(cell)) return format_double(std::get<double>(cell));
  return quote_if_needed(std::get<std::string>(cell));
}

}  // namespace

void emit_csv(const std::vector<CsvRow>& records, const std::vector<std::string>& columns,
              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvaluationError("emit_csv: cannot open " + path);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c > 0) out << ',';
    out << quote_if_needed(columns[c]);
  }
  out << "\r\n";
  for (const CsvRow& row : records) {
    if (row.size() != columns.size())
      throw DomainError("emit_csv: record width does not match the schema");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << ',';
      out << render(row[c]);
    }
    out << "\r\n";
  }
  out.flush();
  if (!out) throw EvaluationError("emit_csv: write failed for " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvaluationError("read_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cell += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(cell);
    if (header) {
      table.columns = cells;
      header = false;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

}  // namespace mfkit
