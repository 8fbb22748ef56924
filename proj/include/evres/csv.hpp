#pragma once

#include <evres/common.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace evres::csv {

class ParseError : public Error {
public:
  ParseError(const std::string& file, std::size_t line, const std::string& column, const std::string& what)
      : Error(file + ":" + std::to_string(line) + (column.empty() ? "" : " column '" + column + "'") + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  const std::string& column() const { return column_; }

private:
  std::size_t line_;
  std::string column_;
};

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!cell.empty() && cell.back() == '\r') cell.remove_suffix(1);
    out.emplace_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// A header-validated CSV file. Rows carry their 1-based physical line number.
struct Table {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(path + ": missing column '" + name + "'");
  }

  double number(std::size_t row, std::size_t col) const {
    try {
      return parse_double(rows[row][col]);
    } catch (const Error& e) {
      throw ParseError(path, line_numbers[row], header[col], e.what());
    }
  }

  long long integer(std::size_t row, std::size_t col) const {
    try {
      return parse_int(rows[row][col]);
    } catch (const Error& e) {
      throw ParseError(path, line_numbers[row], header[col], e.what());
    }
  }
};

inline Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  if (!std::filesystem::exists(path)) throw Error("file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  Table t;
  t.path = path.string();
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      if (cells != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw ParseError(t.path, lineno, "", "header mismatch, expected '" + want + "'");
      }
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError(t.path, lineno, "",
                       "expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) throw Error(t.path + ": empty file");
  return t;
}

class Writer {
public:
  explicit Writer(const std::vector<std::string>& header) { row_strings(header); }

  Writer& cell(double v) { return raw(format_double(v)); }
  Writer& cell(long long v) { return raw(std::to_string(v)); }
  Writer& cell(std::size_t v) { return raw(std::to_string(v)); }
  Writer& cell(int v) { return raw(std::to_string(v)); }
  Writer& cell(const std::string& v) { return raw(v); }
  Writer& cell(const char* v) { return raw(v); }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

  std::string str() const { return out_.str(); }
  void save(const std::filesystem::path& path) const { write_file_atomic(path, out_.str()); }

private:
  Writer& raw(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (const auto& c : cells) raw(c);
    end_row();
  }

  std::ostringstream out_;
  bool first_ = true;
};

}  // namespace evres::csv
