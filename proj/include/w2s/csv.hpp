#pragma once

// Flat CSV tables: header row, comma separated, LF line endings, doubles in
// 17 significant digits so that parsing a file back is exact.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "w2s/error.hpp"

namespace w2s::csv {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

  class RowBuilder {
   public:
    explicit RowBuilder(Table& t) : table_(t) {}
    RowBuilder(const RowBuilder&) = delete;
    ~RowBuilder() noexcept(false) {
      if (cells_.size() != table_.header_.size()) {
        fail(ErrorKind::dimension_mismatch, "row has " + std::to_string(cells_.size()) + " cells, header has " +
                                                std::to_string(table_.header_.size()));
      }
      table_.rows_.push_back(std::move(cells_));
    }

    template <typename T>
    RowBuilder& operator<<(const T& value) {
      if constexpr (std::is_same_v<T, bool>) {
        cells_.push_back(value ? "1" : "0");
      } else if constexpr (std::is_floating_point_v<T>) {
        cells_.push_back(format_double(static_cast<double>(value)));
      } else if constexpr (std::is_integral_v<T>) {
        cells_.push_back(std::to_string(value));
      } else {
        cells_.push_back(std::string(value));
      }
      return *this;
    }

   private:
    Table& table_;
    std::vector<std::string> cells_;
  };

  RowBuilder row() { return RowBuilder(*this); }

  void append(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) fail(ErrorKind::dimension_mismatch, "row width differs from header");
    rows_.push_back(std::move(cells));
  }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::config_invalid, "cannot open '" + path + "' for writing");
    f << str();
    if (!f) fail(ErrorKind::config_invalid, "failed writing '" + path + "'");
  }

  /// Index of a header column, or throws.
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return i;
    }
    fail(ErrorKind::config_invalid, "no column '" + name + "'");
  }

  double number(std::size_t row, const std::string& name) const {
    return std::strtod(rows_.at(row).at(column(name)).c_str(), nullptr);
  }

  const std::string& text(std::size_t row, const std::string& name) const { return rows_.at(row).at(column(name)); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parses text produced by Table::str(). Cells never contain commas or quotes.
inline Table parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) fail(ErrorKind::config_invalid, "empty CSV");
  Table t(split(line));
  while (std::getline(in, line)) {
    if (!line.empty()) t.append(split(line));
  }
  return t;
}

inline Table read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::config_invalid, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

}  // namespace w2s::csv
