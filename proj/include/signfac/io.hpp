#pragma once

// Dense matrix I/O: plain CSV and MatrixMarket "array real general".

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"

namespace signfac {

enum class MatrixFormat { csv, matrixmarket };

inline MatrixFormat parse_matrix_format(const std::string& name) {
  if (name == "csv") return MatrixFormat::csv;
  if (name == "matrixmarket" || name == "mm" || name == "mtx") return MatrixFormat::matrixmarket;
  throw UsageError("unknown matrix format '" + name + "' (expected csv or matrixmarket)");
}

inline const char* to_string(MatrixFormat f) { return f == MatrixFormat::csv ? "csv" : "matrixmarket"; }

/// File system errors when reading or writing matrices are reported as parse
/// failures so they share the CLI's input/output exit code.
struct IoError : ParseError {
  explicit IoError(const std::string& what) : ParseError(what) {}
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string where(const std::string& source, std::size_t line, std::size_t column) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(column);
}

inline double parse_double(std::string_view token, const std::string& source, std::size_t line, std::size_t column) {
  const std::string_view t = trim(token);
  if (t.empty()) throw ParseError(where(source, line, column) + ": empty field");
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ParseError(where(source, line, column) + ": cannot parse '" + std::string(t) + "' as a number");
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

/// Rows separated by newlines, entries by commas. Blank lines are only
/// allowed at the end.
inline Matrix parse_csv(std::string_view text, const std::string& source = "<csv>") {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(source + ": no data");
  std::vector<std::vector<double>> rows;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string_view line = lines[li];
    if (detail::trim(line).empty()) throw ParseError(detail::where(source, li + 1, 1) + ": blank row");
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::size_t end = comma == std::string_view::npos ? line.size() : comma;
      row.push_back(detail::parse_double(line.substr(start, end - start), source, li + 1, row.size() + 1));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(detail::where(source, li + 1, 1) + ": row " + std::to_string(li + 1) + " has " +
                       std::to_string(row.size()) + " fields, expected " + std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return out;
}

/// Dense MatrixMarket: banner, optional % comments, "rows cols", then
/// rows*cols values in column-major order.
inline Matrix parse_matrix_market(std::string_view text, const std::string& source = "<matrixmarket>") {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(source + ": no data");
  {
    std::istringstream banner{std::string(lines[0])};
    std::string tag, object, layout, field, symmetry;
    banner >> tag >> object >> layout >> field >> symmetry;
    auto lower = [](std::string s) {
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      return s;
    };
    if (tag != "%%MatrixMarket") throw ParseError(detail::where(source, 1, 1) + ": missing %%MatrixMarket banner");
    if (lower(object) != "matrix" || lower(layout) != "array" || lower(field) != "real" || lower(symmetry) != "general")
      throw ParseError(detail::where(source, 1, 1) + ": only 'matrix array real general' is supported");
  }
  std::size_t li = 1;
  while (li < lines.size() && (detail::trim(lines[li]).empty() || detail::trim(lines[li]).front() == '%')) ++li;
  if (li == lines.size()) throw ParseError(source + ": missing size line");
  long long rows = -1;
  long long cols = -1;
  {
    std::istringstream size_line{std::string(lines[li])};
    std::string extra;
    if (!(size_line >> rows >> cols) || (size_line >> extra) || rows < 1 || cols < 1)
      throw ParseError(detail::where(source, li + 1, 1) + ": expected two positive integers 'rows cols'");
  }
  ++li;
  Matrix out(rows, cols);
  long long k = 0;
  for (; li < lines.size(); ++li) {
    const std::string_view line = lines[li];
    if (!detail::trim(line).empty() && detail::trim(line).front() == '%') continue;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      if (pos == line.size()) break;
      std::size_t end = pos;
      while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
      if (k == rows * cols) throw ParseError(detail::where(source, li + 1, pos + 1) + ": more values than rows*cols");
      out(static_cast<Index>(k % rows), static_cast<Index>(k / rows)) =
          detail::parse_double(line.substr(pos, end - pos), source, li + 1, pos + 1);
      ++k;
      pos = end;
    }
  }
  if (k != rows * cols)
    throw ParseError(source + ": expected " + std::to_string(rows * cols) + " values, found " + std::to_string(k));
  return out;
}

inline Matrix read_matrix(const std::string& path, MatrixFormat format = MatrixFormat::csv) {
  const std::string text = detail::read_file(path);
  return format == MatrixFormat::csv ? parse_csv(text, path) : parse_matrix_market(text, path);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_matrix(const Matrix& m, MatrixFormat format) {
  std::string out;
  if (format == MatrixFormat::csv) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (j) out += ',';
        out += format_double(m(i, j));
      }
      out += '\n';
    }
  } else {
    out += "%%MatrixMarket matrix array real general\n";
    out += std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) out += format_double(m(i, j)) + "\n";
  }
  return out;
}

/// Writes to a temporary file in the target directory, then renames it over
/// the destination.
inline void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw IoError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
  }
}

inline void write_matrix(const Matrix& m, const std::string& path, MatrixFormat format = MatrixFormat::csv) {
  if (m.rows() < 1 || m.cols() < 1) throw PreconditionError("write_matrix: matrix must be nonempty");
  write_text_atomic(path, format_matrix(m, format));
}

}  // namespace signfac
