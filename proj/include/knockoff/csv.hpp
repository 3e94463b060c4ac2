#ifndef KNOCKOFF_CSV_HPP
#define KNOCKOFF_CSV_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "knockoff/common.hpp"

namespace knockoff {

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;  // n x p
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads a comma-delimited numeric table. The first line is a required
/// header; every other cell must parse as a decimal number.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV file: " + path);
  CsvTable table;
  for (const auto& h : detail::split_csv_line(line)) table.header.push_back(detail::trim(h));
  const std::size_t p = table.header.size();
  if (p == 0) throw InputError("CSV header has no columns: " + path);

  std::vector<double> cells;
  std::size_t n = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != p) {
      throw InputError(path + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " + std::to_string(p));
    }
    for (std::size_t j = 0; j < p; ++j) {
      const std::string cell = detail::trim(fields[j]);
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw InputError(path + ": non-numeric cell at line " + std::to_string(line_no) +
                         ", column " + std::to_string(j + 1) + " (" + table.header[j] + "): '" +
                         cell + "'");
      }
      cells.push_back(v);
    }
    ++n;
  }

  table.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i * p + j];
  return table;
}

/// Formats a double with 17 significant digits, enough for an exact
/// binary round-trip.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const Matrix& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols())
    throw InputError("write_csv: header size does not match column count");
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_full(values(i, j));
    }
    out << '\n';
  }
  if (!out) throw NumericError("write failed: " + path);
}

}  // namespace knockoff

#endif  // KNOCKOFF_CSV_HPP
