#pragma once

// Delimited text files for trials. Codes: header row naming channels, one
// unit per row. Treatment: header `t`, one 0/1 per row. Values are written
// with 17 significant digits so reading them back is exact.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nes/error.hpp"
#include "nes/types.hpp"

namespace nes {

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline double parse_real(std::string_view field, const std::string& where) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  require(ec == std::errc() && ptr == last && !field.empty(), ErrorKind::parse_error,
          "cannot parse '" + std::string(field) + "' as a number at " + where);
  require(std::isfinite(value), ErrorKind::non_finite_value, "non-finite value at " + where);
  return value;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read_table(const std::filesystem::path& path, char delimiter = ',') {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot open " + path.string());
  Table table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line, delimiter);
    std::vector<std::string> row(fields.begin(), fields.end());
    if (!have_header) {
      table.header = std::move(row);
      have_header = true;
      continue;
    }
    require(row.size() == table.header.size(), ErrorKind::parse_error,
            path.string() + ":" + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                " fields, header has " + std::to_string(table.header.size()));
    table.rows.push_back(std::move(row));
  }
  require(have_header, ErrorKind::parse_error, path.string() + " is empty");
  return table;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline CodeMatrix read_codes(const std::filesystem::path& path) {
  const auto table = detail::read_table(path);
  require(!table.rows.empty(), ErrorKind::parse_error, path.string() + " has no data rows");
  Eigen::MatrixXd values(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < table.header.size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::parse_real(
          table.rows[i][j], path.string() + " row " + std::to_string(i + 1) + " column " + std::to_string(j));
  return CodeMatrix(std::move(values));
}

/// Single-column 0/1 table (treatment, or a binary covariate).
inline std::vector<std::uint8_t> read_binary_column(const std::filesystem::path& path, ErrorKind non_binary_kind) {
  const auto table = detail::read_table(path);
  require(table.header.size() == 1, ErrorKind::parse_error, path.string() + " must have exactly one column");
  std::vector<std::uint8_t> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double v = detail::parse_real(table.rows[i][0], path.string() + " row " + std::to_string(i + 1));
    require(v == 0.0 || v == 1.0, non_binary_kind,
            path.string() + " row " + std::to_string(i + 1) + " holds " + table.rows[i][0] + ", expected 0 or 1");
    out.push_back(v == 1.0 ? 1 : 0);
  }
  return out;
}

inline TreatmentAssignment read_treatment(const std::filesystem::path& path) {
  return TreatmentAssignment(read_binary_column(path, ErrorKind::non_binary_treatment));
}

inline std::pair<CodeMatrix, TreatmentAssignment> load_trial(const std::filesystem::path& codes_path,
                                                             const std::filesystem::path& treatment_path) {
  CodeMatrix codes = read_codes(codes_path);
  TreatmentAssignment treatment = read_treatment(treatment_path);
  require(codes.units() == treatment.size(), ErrorKind::row_count_mismatch,
          "codes have " + std::to_string(codes.units()) + " rows, treatment has " + std::to_string(treatment.size()));
  return {std::move(codes), std::move(treatment)};
}

inline void write_codes(const std::filesystem::path& path, const CodeMatrix& codes) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + path.string());
  for (Index j = 0; j < codes.channels(); ++j) out << (j ? "," : "") << 'c' << j;
  out << '\n';
  for (Index i = 0; i < codes.units(); ++i) {
    for (Index j = 0; j < codes.channels(); ++j) out << (j ? "," : "") << detail::format_real(codes(i, j));
    out << '\n';
  }
}

inline void write_binary_column(const std::filesystem::path& path, std::string_view name,
                                const std::vector<std::uint8_t>& values) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + path.string());
  out << name << '\n';
  for (auto v : values) out << static_cast<int>(v) << '\n';
}

inline void write_trial(const std::filesystem::path& codes_path, const std::filesystem::path& treatment_path,
                        const CodeMatrix& codes, const TreatmentAssignment& treatment) {
  require_matching(codes, treatment);
  write_codes(codes_path, codes);
  write_binary_column(treatment_path, "t", treatment.arms());
}

}  // namespace nes
