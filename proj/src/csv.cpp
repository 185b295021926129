#include "bentcable/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bentcable/errors.hpp"

namespace bentcable {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

CsvTable parse_csv(std::string_view text, const std::string& path_label) {
  CsvTable t;
  t.path = path_label;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty() || line.front() == '#') {
      if (nl == text.size()) break;
      continue;
    }
    // UTF-8 byte-order mark on the first line.
    if (!have_header && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    auto fields = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size()) {
        throw IngestionError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             path_label + ":" + std::to_string(line_no));
      }
      t.rows.push_back(std::move(fields));
      t.line_numbers.push_back(line_no);
    }
    if (nl == text.size()) break;
  }
  if (!have_header) throw IngestionError("missing header row", path_label);
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name) const {
  auto c = column(name);
  if (!c) throw IngestionError("missing required column '" + std::string(name) + "'", path);
  return *c;
}

std::string CsvTable::where(std::size_t row) const {
  return path + ":" + std::to_string(line_numbers.at(row));
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& f = rows.at(row).at(col);
  if (f.empty() || f == "NA" || f == "NaN" || f == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* end = f.data() + f.size();
  auto [p, ec] = std::from_chars(f.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw IngestionError("non-numeric value '" + f + "' in column '" + header.at(col) + "'", where(row));
  }
  return v;
}

long CsvTable::integer(std::size_t row, std::size_t col) const {
  const std::string& f = rows.at(row).at(col);
  long v = 0;
  const char* end = f.data() + f.size();
  auto [p, ec] = std::from_chars(f.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw IngestionError("non-integer value '" + f + "' in column '" + header.at(col) + "'", where(row));
  }
  return v;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

}  // namespace bentcable
