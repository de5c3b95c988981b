/*
 * Copyright 2026 The eagernet authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "eagernet/errors.hpp"

// Minimal strict CSV: comma separated, no quoting or embedded commas. The
// packet, flow and label schemas this tool defines never need quoting.

namespace eagernet {

inline void split_csv_line(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Reads a header line plus data rows; enforces a constant column count.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in, std::string name = "<csv>")
      : in_(in), name_(std::move(name)) {
    std::string header;
    if (!std::getline(in_, header)) throw DataError(name_ + ": empty file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    std::vector<std::string_view> cells;
    split_csv_line(header, cells);
    for (auto c : cells) header_.emplace_back(c);
    line_no_ = 1;
  }

  const std::vector<std::string>& header() const { return header_; }

  // Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string_view>& cells) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (!line_.empty() && line_.back() == '\r') line_.pop_back();
      if (line_.empty()) continue;
      split_csv_line(line_, cells);
      if (cells.size() != header_.size()) {
        throw DataError(location() + ": expected " +
                        std::to_string(header_.size()) + " fields, got " +
                        std::to_string(cells.size()));
      }
      return true;
    }
    return false;
  }

  std::string location() const { return name_ + ":" + std::to_string(line_no_); }

  // Index of a named column, or -1.
  int column(std::string_view name) const {
    for (size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == name) return static_cast<int>(i);
    return -1;
  }

 private:
  std::istream& in_;
  std::string name_;
  std::vector<std::string> header_;
  std::string line_;
  size_t line_no_ = 0;
};

inline double parse_double_field(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw DataError(where + ": malformed number '" + std::string(s) + "'");
  return v;
}

inline uint64_t parse_uint_field(std::string_view s, uint64_t max,
                                 const std::string& where) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v > max)
    throw DataError(where + ": malformed integer '" + std::string(s) + "'");
  return v;
}

inline bool parse_bool01_field(std::string_view s, const std::string& where) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw DataError(where + ": expected 0 or 1, got '" + std::string(s) + "'");
}

// Shortest round-trip formatting; keeps command outputs byte-reproducible.
inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace eagernet
