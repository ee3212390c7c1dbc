#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace falqon::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  double width = 720;
  double height = 420;
  std::vector<double> x_markers;  // vertical dashed lines (e.g. ground energy)
};

namespace detail {

inline constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
inline constexpr double kLeft = 70, kRight = 20, kTop = 36, kBottom = 50;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  bool log_y;
  double w, h;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (w - kLeft - kRight); }
  double py(double y) const {
    const double v = log_y ? std::log10(y) : y;
    return h - kBottom - (v - y0) / (y1 - y0) * (h - kTop - kBottom);
  }
};

inline bool usable(double y, bool log_y) { return std::isfinite(y) && (!log_y || y > 0); }

inline Frame make_frame(const std::vector<Series>& series, const ChartOptions& opt, bool include_zero) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.y[i], opt.log_y) || !std::isfinite(s.x[i])) continue;
      const double v = opt.log_y ? std::log10(s.y[i]) : s.y[i];
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  for (double m : opt.x_markers) {
    x0 = std::min(x0, m);
    x1 = std::max(x1, m);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (include_zero && !opt.log_y) y0 = std::min(y0, 0.0), y1 = std::max(y1, 0.0);
  if (opt.log_y) y0 = std::floor(y0), y1 = std::ceil(y1);
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  if (!opt.log_y) {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  return {x0, x1, y0, y1, opt.log_y, opt.width, opt.height};
}

inline void axes(std::ostringstream& os, const Frame& f, const ChartOptions& opt) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.w) << "\" height=\"" << num(f.h)
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(f.w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(opt.title) << "</text>\n";
  const double left = kLeft, right = f.w - kRight, top = kTop, bottom = f.h - kBottom;
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left)
     << "\" height=\"" << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 5.0;
    const double X = f.px(xv);
    os << "<line x1=\"" << num(X) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(X) << "\" y2=\""
       << num(bottom + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(X) << "\" y=\"" << num(bottom + 18) << "\" text-anchor=\"middle\">"
       << tick_label(xv) << "</text>\n";
  }
  const int ny = opt.log_y ? static_cast<int>(std::min(10.0, f.y1 - f.y0)) : 5;
  for (int i = 0; i <= ny; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / ny;
    const double Y = f.h - kBottom - (v - f.y0) / (f.y1 - f.y0) * (f.h - kTop - kBottom);
    os << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(Y) << "\" x2=\"" << num(left) << "\" y2=\""
       << num(Y) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(Y + 4) << "\" text-anchor=\"end\">"
       << (opt.log_y ? "1e" + tick_label(v) : tick_label(v)) << "</text>\n";
  }
  os << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(f.h - 12)
     << "\" text-anchor=\"middle\">" << escape(opt.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num((top + bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num((top + bottom) / 2) << ")\">" << escape(opt.y_label) << "</text>\n";
  for (double m : opt.x_markers) {
    os << "<line x1=\"" << num(f.px(m)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(f.px(m)) << "\" y2=\""
       << num(bottom) << "\" stroke=\"#d62728\" stroke-dasharray=\"5,4\"/>\n";
  }
}

inline void legend(std::ostringstream& os, const Frame& f, const std::vector<Series>& series) {
  if (series.size() < 2) return;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 16 + 16.0 * static_cast<double>(i);
    const double x = f.w - kRight - 150;
    os << "<line x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 20) << "\" y2=\""
       << num(y - 4) << "\" stroke=\"" << kColors[i % 5] << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(x + 26) << "\" y=\"" << num(y) << "\">" << escape(series[i].name) << "</text>\n";
  }
}

}  // namespace detail

/// Polyline chart; on a log axis non-positive points are skipped.
inline std::string line_chart(const std::vector<Series>& series, const ChartOptions& opt) {
  using namespace detail;
  const Frame f = make_frame(series, opt, false);
  std::ostringstream os;
  axes(os, f, opt);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    os << "<polyline fill=\"none\" stroke=\"" << kColors[k % 5] << "\" stroke-width=\"1.2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.y[i], opt.log_y)) continue;
      os << (first ? "" : " ") << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
  }
  legend(os, f, series);
  os << "</svg>\n";
  return os.str();
}

/// Stem plot: one vertical line from zero per point.
inline std::string stem_chart(const Series& s, const ChartOptions& opt) {
  using namespace detail;
  const std::vector<Series> one{s};
  const Frame f = make_frame(one, opt, true);
  std::ostringstream os;
  axes(os, f, opt);
  const double base = opt.log_y ? f.h - kBottom : f.py(0.0);
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    if (!usable(s.y[i], opt.log_y)) continue;
    const double X = f.px(s.x[i]);
    const double Y = f.py(s.y[i]);
    os << "<line x1=\"" << num(X) << "\" y1=\"" << num(base) << "\" x2=\"" << num(X) << "\" y2=\"" << num(Y)
       << "\" stroke=\"" << kColors[0] << "\"/>\n";
    os << "<circle cx=\"" << num(X) << "\" cy=\"" << num(Y) << "\" r=\"2.5\" fill=\"" << kColors[0] << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace falqon::svg
