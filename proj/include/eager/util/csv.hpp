#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "eager/util/errors.hpp"

namespace eager {

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw DataError("cannot open for writing: " + path);
    write_row_strings(header);
  }

  void write_row_strings(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();
  }

  void write_row(const std::vector<double>& cells, int precision = 10) {
    std::ostringstream ss;
    ss << std::setprecision(precision);
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) ss << ',';
      ss << cells[i];
    }
    out_ << ss.str() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw DataError("csv column not found: " + name);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      std::vector<double> row;
      row.reserve(cells.size());
      for (auto& c : cells) row.push_back(std::stod(c));
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

}  // namespace eager
