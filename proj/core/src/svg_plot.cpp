#include "l2gd/svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <sstream>

#include "l2gd/errors.hpp"

namespace l2gd {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return c;
  }
  throw DataError("csv has no column '" + name + "'");
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& s) {
  if (s == "nan" || s == "-nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::numeric_limits<double>::quiet_NaN();
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

double nice_step(double span, int target_ticks) {
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  const double nice = r < 1.5 ? 1.0 : r < 3.0 ? 2.0 : r < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("no rows");
  t.header = split_fields(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != t.header.size()) throw DataError("csv row has the wrong number of fields");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_cell(f));
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw DataError("no rows");
  return t;
}

std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& o) {
  if (series.empty()) throw DataError("no rows");
  for (const auto& s : series) {
    if (s.table.header != series.front().table.header) throw DataError("csv schema mismatch between inputs");
    if (s.table.rows.empty()) throw DataError("no rows");
  }
  const std::size_t xc = series.front().table.column(o.x_column);
  const std::size_t yc = series.front().table.column(o.y_column);

  const auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!o.log_y || y > 0.0);
  };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& r : s.table.rows) {
      if (!usable(r[xc], r[yc])) continue;
      const double y = o.log_y ? std::log10(r[yc]) : r[yc];
      xmin = std::min(xmin, r[xc]);
      xmax = std::max(xmax, r[xc]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) throw DataError("no plottable rows");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (o.log_y) {
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
  }
  if (ymax == ymin) ymax = ymin + 1.0;

  const double left = 70, right = 150, top = 30, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  const auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  const auto sy = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
      << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!o.title.empty()) {
    svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(o.title) << "</text>\n";
  }
  svg << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // x ticks
  const double xs = nice_step(xmax - xmin, 5);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
    svg << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(sx(t)) << "\" y2=\""
        << fmt(top + ph + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
        << tick_label(t) << "</text>\n";
  }
  // y ticks
  if (o.log_y) {
    const int step = std::max(1, static_cast<int>(std::ceil((ymax - ymin) / 8.0)));
    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); e += step) {
      svg << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(sy(e)) << "\" x2=\"" << fmt(left) << "\" y2=\""
          << fmt(sy(e)) << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(sy(e) + 4)
          << "\" text-anchor=\"end\" font-size=\"11\">1e" << e << "</text>\n";
    }
  } else {
    const double ys = nice_step(ymax - ymin, 5);
    for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
      svg << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << fmt(left) << "\" y2=\""
          << fmt(sy(t)) << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(sy(t) + 4)
          << "\" text-anchor=\"end\" font-size=\"11\">" << tick_label(t) << "</text>\n";
    }
  }
  svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(o.height - 10.0)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(o.x_column) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << fmt(top + ph / 2) << ")\">" << escape(o.y_column) << (o.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& r : series[s].table.rows) {
      if (!usable(r[xc], r[yc])) continue;
      const double y = o.log_y ? std::log10(r[yc]) : r[yc];
      svg << (first ? "" : " ") << fmt(sx(r[xc])) << ',' << fmt(sy(y));
      first = false;
    }
    svg << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(s);
    svg << "<line x1=\"" << fmt(left + pw + 10) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(left + pw + 30)
        << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(left + pw + 35) << "\" y=\"" << fmt(ly + 4) << "\" font-size=\"11\">"
        << escape(series[s].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace l2gd
