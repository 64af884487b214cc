#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace l2gd {

/// Numeric CSV with a header row. Cells that do not parse become NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index; throws DataError if missing.
  std::size_t column(const std::string& name) const;
};

/// Throws DataError "no rows" when the table has a header but no data.
CsvTable read_csv(std::istream& in);

struct PlotSeries {
  std::string label;
  CsvTable table;
};

struct PlotOptions {
  std::string x_column = "k";
  std::string y_column = "rel_subopt";
  /// Log scale on y; defaults on for rel_subopt and dist_sq.
  bool log_y = true;
  int width = 640;
  int height = 400;
  std::string title;
};

/// Deterministic SVG line chart: one polyline per series, legend in input
/// order, axes labelled with the column names. Non-positive values are
/// skipped on a log axis. All series must share the header.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& options);

}  // namespace l2gd
