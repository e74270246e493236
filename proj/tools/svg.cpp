// Copyright 2026 The snapml Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace snapml::svg {
namespace {

constexpr double kWidth = 760;
constexpr double kHeight = 480;
constexpr double kLeft = 80;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 60;

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 1e-2 || std::abs(v) >= 1e4)) {
    std::snprintf(buf, sizeof(buf), "%.0e", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%g", v);
  }
  return buf;
}

struct Scale {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;
  double px_lo = 0.0;
  double px_hi = 1.0;

  double operator()(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double t = ((log ? std::log10(v) : v) - a) / (b - a);
    return px_lo + t * (px_hi - px_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = static_cast<int>(std::floor(std::log10(lo))); e <= std::ceil(std::log10(hi)); ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push_back(v);
      }
      return out;
    }
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      step = m * mag;
      if (step >= raw) break;
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
  }
};

Scale make_scale(double lo, double hi, bool log, double px_lo, double px_hi) {
  if (!(lo < hi)) {
    const double pad = log ? 10.0 : (lo == 0.0 ? 1.0 : std::abs(lo) * 0.1);
    lo = log ? lo / pad : lo - pad;
    hi = log ? hi * pad : hi + pad;
  }
  if (log) {
    lo = std::pow(10.0, std::floor(std::log10(lo)));
    hi = std::pow(10.0, std::ceil(std::log10(hi)));
  }
  return {lo, hi, log, px_lo, px_hi};
}

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
}

void axes(std::ostringstream& o, const Scale& xs, const Scale& ys, const Axis& x, const Axis& y) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  o << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : xs.ticks()) {
    const double px = xs(t);
    o << "<line x1=\"" << num(px) << "\" y1=\"" << y0 << "\" x2=\"" << num(px) << "\" y2=\"" << y0 + 5
      << "\" stroke=\"black\"/>\n<text x=\"" << num(px) << "\" y=\"" << y0 + 18
      << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
  }
  for (double t : ys.ticks()) {
    const double py = ys(t);
    o << "<line x1=\"" << x0 - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << x0 << "\" y2=\"" << num(py)
      << "\" stroke=\"black\"/>\n<text x=\"" << x0 - 8 << "\" y=\"" << num(py + 4)
      << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
  }
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
    << escape(x.label) << "</text>\n"
    << "<text transform=\"translate(20," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(y.label) << "</text>\n";
}

// Blue (negative) through white to red (positive).
std::string diverging(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r, g, b;
  if (t < 0) {
    r = static_cast<int>(255 * (1 + t) + 33 * -t);
    g = static_cast<int>(255 * (1 + t) + 102 * -t);
    b = static_cast<int>(255 * (1 + t) + 172 * -t);
  } else {
    r = static_cast<int>(255 * (1 - t) + 178 * t);
    g = static_cast<int>(255 * (1 - t) + 24 * t);
    b = static_cast<int>(255 * (1 - t) + 43 * t);
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string chart(const std::vector<Series>& series, const Axis& x, const Axis& y,
                  const std::string& title) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((x.log && s.x[i] <= 0) || (y.log && s.y[i] <= 0)) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo)) {
    xlo = x.log ? 1.0 : 0.0;
    xhi = x.log ? 10.0 : 1.0;
    ylo = y.log ? 1.0 : 0.0;
    yhi = y.log ? 10.0 : 1.0;
  }
  const Scale xs = make_scale(xlo, xhi, x.log, kLeft, kWidth - kRight);
  const Scale ys = make_scale(ylo, yhi, y.log, kHeight - kBottom, kTop);

  std::ostringstream o;
  header(o, title);
  axes(o, xs, ys, x, y);
  int legend_row = 0;
  for (const auto& s : series) {
    std::string path;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((x.log && s.x[i] <= 0) || (y.log && s.y[i] <= 0)) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double px = xs(s.x[i]), py = ys(s.y[i]);
      if (s.line) path += (path.empty() ? "M" : " L") + num(px) + ',' + num(py);
      if (s.markers) {
        o << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"3\" fill=\"" << s.color
          << "\"/>\n";
      }
    }
    if (!path.empty()) {
      o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"/>\n";
    }
    if (!s.label.empty()) {
      const double ly = kTop + 10 + 18 * legend_row++;
      const double lx = kWidth - kRight + 12;
      o << "<rect x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"8\" fill=\"" << s.color
        << "\"/>\n<text x=\"" << lx + 18 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string heatmap(const std::vector<double>& xs, const std::vector<std::vector<double>>& values,
                    const std::string& x_label, const std::string& y_label,
                    const std::string& title) {
  const std::size_t rows = values.size();
  const std::size_t cols = xs.size();
  double vmax = 0.0;
  for (const auto& r : values) {
    for (double v : r) vmax = std::max(vmax, std::abs(v));
  }
  if (vmax == 0.0) vmax = 1.0;
  const double xlo = cols ? xs.front() : 0.0;
  const double xhi = cols > 1 ? xs.back() : xlo + 1.0;
  const Scale sx = make_scale(xlo, xhi, false, kLeft, kWidth - kRight);
  const Scale sy = make_scale(-0.5, rows - 0.5, false, kHeight - kBottom, kTop);

  std::ostringstream o;
  header(o, title);
  const double cell_h = (kHeight - kBottom - kTop) / std::max<std::size_t>(rows, 1);
  for (std::size_t c = 0; c < cols; ++c) {
    const double left = c == 0 ? kLeft : (sx(xs[c - 1]) + sx(xs[c])) / 2;
    const double right = c + 1 == cols ? kWidth - kRight : (sx(xs[c]) + sx(xs[c + 1])) / 2;
    for (std::size_t r = 0; r < rows; ++r) {
      const double top = sy(r + 0.5);
      o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left + 0.3)
        << "\" height=\"" << num(cell_h + 0.3) << "\" fill=\"" << diverging(values[r][c] / vmax)
        << "\"/>\n";
    }
  }
  axes(o, sx, sy, {x_label}, {y_label});
  // Colour bar.
  const double bx = kWidth - kRight + 30;
  for (int i = 0; i < 100; ++i) {
    const double t = 1.0 - 2.0 * i / 99.0;
    const double by = kTop + i * (kHeight - kTop - kBottom) / 100.0;
    o << "<rect x=\"" << bx << "\" y=\"" << num(by) << "\" width=\"18\" height=\""
      << num((kHeight - kTop - kBottom) / 100.0 + 0.3) << "\" fill=\"" << diverging(t) << "\"/>\n";
  }
  o << "<text x=\"" << bx + 24 << "\" y=\"" << kTop + 10 << "\">" << tick_label(vmax) << "</text>\n"
    << "<text x=\"" << bx + 24 << "\" y=\"" << (kHeight - kBottom + kTop) / 2 << "\">0</text>\n"
    << "<text x=\"" << bx + 24 << "\" y=\"" << kHeight - kBottom << "\">" << tick_label(-vmax)
    << "</text>\n</svg>\n";
  return o.str();
}

}  // namespace snapml::svg
