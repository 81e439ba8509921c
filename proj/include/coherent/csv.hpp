#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "coherent/error.hpp"

namespace coherent::csv {

/// Parsed CSV: header row plus data rows of equal width. No quoting support;
/// series names and period labels never contain commas.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw input_error("CSV missing required column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos
                                        ? std::string_view::npos
                                        : pos - start);
    while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
      field.remove_suffix(1);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline Table parse(std::string_view text) {
  Table t;
  std::size_t start = 0;
  bool first = true;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    auto line = text.substr(
        start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!line.empty() && !(line.size() == 1 && line[0] == '\r')) {
      auto fields = split_line(line);
      if (first) {
        t.header = std::move(fields);
        first = false;
      } else {
        if (fields.size() != t.header.size())
          throw input_error("CSV row has " + std::to_string(fields.size()) +
                            " fields, header has " +
                            std::to_string(t.header.size()));
        t.rows.push_back(std::move(fields));
      }
    }
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (first) throw input_error("CSV file is empty");
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw input_error("bad numeric field '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw input_error("bad integer field '" + s + "'");
  return v;
}

/// Values serialized with 12 significant digits, enough to round-trip the
/// currency aggregates this tool handles.
inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw input_error("cannot open file for writing: " + path);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace coherent::csv
