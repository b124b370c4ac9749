#pragma once

#include <string>
#include <variant>
#include <vector>

namespace mfkit {

using CsvCell = std::variant<long long, double, std::string>;
using CsvRow = std::vector<CsvCell>;

/// RFC-4180-style writer: header row, fixed column order, floats rendered
/// with 17 significant digits (value-preserving round trip).
void emit_csv(const std::vector<CsvRow>& records, const std::vector<std::string>& columns,
              const std::string& path);

std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

}  // namespace mfkit
