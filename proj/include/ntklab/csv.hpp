#pragma once

// Minimal CSV emitter for experiment results.
//
// Output layout: a block of '#'-prefixed header lines (configuration echo,
// seed, sampler identity, version string), then one row of column names,
// then data rows.  Floating-point cells carry 17 significant digits so that
// doubles round-trip exactly; files are plain ASCII (hence valid UTF-8).

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace ntklab {

class CsvWriter {
 public:
  // Opens (truncates) `path`; throws std::runtime_error on failure.
  explicit CsvWriter(const std::string& path);

  // One '#'-prefixed header line (the '#' and space are added here).
  void comment(const std::string& line);

  // The column-name row; call exactly once, after the comments.
  void columns(const std::vector<std::string>& names);

  // One data row; cells are written verbatim, comma-separated.
  void row(const std::vector<std::string>& cells);

  // Formatting helpers used for every numeric cell.
  static std::string fmt(double v);
  static std::string fmt(int v);
  static std::string fmt(std::uint64_t v);

 private:
  std::ofstream out_;
};

}  // namespace ntklab
