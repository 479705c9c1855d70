#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nhss/core/binary_io.hpp"
#include "nhss/core/error.hpp"

namespace nhss {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("csv: no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

/// Plain comma-separated text without quoting; every row must have as many
/// fields as the header.
inline CsvTable parse_csv(const std::string& text, const std::string& where = "csv") {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw IoError(where + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                    " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw IoError(where + ": empty file");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

inline double parse_number(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size()) throw IoError(what + ": '" + s + "' is not a number");
  return v;
}

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

struct PlotOptions {
  std::string title;
  std::string xlabel = "x";
  std::string ylabel = "y";
  bool logx = false;
  bool logy = false;
  int width = 640;
  int height = 420;
};

/// Groups rows by `group` (or one series when empty) and reads x/y columns.
/// Rows whose y field is empty are skipped; series keep first-appearance
/// order and rows keep file order.
inline std::vector<PlotSeries> series_from_csv(const CsvTable& t, const std::string& x, const std::string& y,
                                               const std::string& group = "") {
  const std::size_t cx = t.column(x), cy = t.column(y);
  const std::size_t cg = group.empty() ? 0 : t.column(group);
  std::vector<PlotSeries> out;
  for (const auto& row : t.rows) {
    if (row[cy].empty()) continue;
    const std::string name = group.empty() ? y : row[cg];
    auto it = std::find_if(out.begin(), out.end(), [&](const PlotSeries& s) { return s.name == name; });
    if (it == out.end()) {
      out.push_back({name, {}, {}});
      it = out.end() - 1;
    }
    it->x.push_back(parse_number(row[cx], "column " + x));
    it->y.push_back(parse_number(row[cy], "column " + y));
  }
  return out;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Tick positions in transformed units; decades on log axes.
inline std::vector<double> ticks(double lo, double hi, bool log) {
  std::vector<double> t;
  if (log) {
    for (double e = std::ceil(lo - 1e-9); e <= hi + 1e-9; e += 1) t.push_back(e);
    if (t.size() >= 2) return t;
  }
  const double span = hi - lo;
  const double raw = span / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  t.clear();
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace detail

/// Standalone SVG line chart. Output depends only on the inputs, so equal
/// inputs give byte-identical files. Each series of two or more points is
/// drawn as one polyline with circle markers.
inline std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt = {}) {
  if (series.empty()) throw ConfigError("plot: no series");
  auto tx = [&](double v) {
    if (opt.logx && !(v > 0)) throw ConfigError("plot: non-positive x on a log axis");
    return opt.logx ? std::log10(v) : v;
  };
  auto ty = [&](double v) {
    if (opt.logy && !(v > 0)) throw ConfigError("plot: non-positive y on a log axis");
    return opt.logy ? std::log10(v) : v;
  };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.empty()) throw ConfigError("plot: series '" + s.name + "' is empty");
    if (s.x.size() != s.y.size()) throw ConfigError("plot: series '" + s.name + "' has unequal x/y lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        throw ConfigError("plot: series '" + s.name + "' has a non-finite value");
      x0 = std::min(x0, tx(s.x[i])), x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
    }
  }
  auto pad = [](double& lo, double& hi) {
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) lo -= 0.5, hi += 0.5;
    const double m = 0.05 * (hi - lo);
    lo -= m, hi += m;
  };
  pad(x0, x1);
  pad(y0, y1);

  const double left = 80, right = 150, top = 40, bottom = 60;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (1 - (v - y0) / (y1 - y0)) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << opt.width << "\" height=\"" << opt.height << "\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    o << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::xml_escape(opt.title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : detail::ticks(x0, x1, opt.logx)) {
    const std::string x = detail::fmt("%.2f", px(t));
    o << "<line x1=\"" << x << "\" y1=\"" << top + ph << "\" x2=\"" << x << "\" y2=\"" << top + ph + 5
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << x << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << detail::fmt("%g", opt.logx ? std::pow(10.0, t) : t) << "</text>\n";
  }
  for (double t : detail::ticks(y0, y1, opt.logy)) {
    const std::string y = detail::fmt("%.2f", py(t));
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << left - 8 << "\" y=\"" << y << "\" text-anchor=\"end\" dominant-baseline=\"middle\">"
      << detail::fmt("%g", opt.logy ? std::pow(10.0, t) : t) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << opt.height - 15 << "\" text-anchor=\"middle\">"
    << detail::xml_escape(opt.xlabel) << "</text>\n";
  o << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
    << top + ph / 2 << ")\">" << detail::xml_escape(opt.ylabel) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % 7];
    if (s.x.size() >= 2) {
      o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        o << (i ? " " : "") << detail::fmt("%.2f", px(tx(s.x[i]))) << ',' << detail::fmt("%.2f", py(ty(s.y[i])));
      o << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i)
      o << "<circle cx=\"" << detail::fmt("%.2f", px(tx(s.x[i]))) << "\" cy=\"" << detail::fmt("%.2f", py(ty(s.y[i])))
        << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    const double ly = top + 12 + 18 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly << "\" dominant-baseline=\"middle\">"
      << detail::xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void write_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt,
                      const std::filesystem::path& path) {
  write_text(path, render_svg(series, opt));
}

}  // namespace nhss
