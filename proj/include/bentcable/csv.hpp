#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bentcable {

// A parsed CSV file: one header row plus data rows. Blank lines and lines
// starting with '#' are skipped. Fields may be double-quoted.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  // Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  // Index of a required header column; throws IngestionError.
  std::size_t require_column(std::string_view name) const;
  std::string where(std::size_t row) const;
  // Parses a numeric field; an empty field or "NA" yields NaN.
  double number(std::size_t row, std::size_t col) const;
  long integer(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::string_view text, const std::string& path_label);

std::vector<std::string> split_csv_line(std::string_view line);

// Shortest round-trip decimal representation of a double ("NA" for NaN).
std::string format_double(double x);

}  // namespace bentcable
