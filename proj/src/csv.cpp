#include "ntklab/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace ntklab {

CsvWriter::CsvWriter(const std::string& path) : out_(path) {
  if (!out_) {
    throw std::runtime_error("CsvWriter: cannot open '" + path +
                             "' for writing");
  }
}

void CsvWriter::comment(const std::string& line) { out_ << "# " << line << "\n"; }

void CsvWriter::columns(const std::vector<std::string>& names) { row(names); }

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << cells[i];
  }
  out_ << "\n";
}

std::string CsvWriter::fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string CsvWriter::fmt(int v) { return std::to_string(v); }

std::string CsvWriter::fmt(std::uint64_t v) { return std::to_string(v); }


}  // namespace ntklab
