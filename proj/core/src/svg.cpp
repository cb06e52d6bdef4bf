#include "sublab/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sublab {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 78.0;
constexpr double kRight = 24.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 56.0;

const std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#17becf"};

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& s) {
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

std::string header(const std::string& title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                  fmt(kWidth, "%.0f") + "\" height=\"" + fmt(kHeight, "%.0f") +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" "
       "font-size=\"14\">" + escape(title) + "</text>\n";
  return s;
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double t(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (t(v) - lo) / (hi - lo); }
};

Axis make_axis(const std::vector<double>& vals, bool log) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : vals) {
    if (!std::isfinite(v) || (log && v <= 0.0)) continue;
    const double tv = log ? std::log10(v) : v;
    lo = std::min(lo, tv);
    hi = std::max(hi, tv);
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12 * std::max(1.0, std::fabs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  } else if (!log) {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  } else {
    lo = std::floor(lo);
    hi = std::ceil(hi);
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

std::vector<double> ticks(const Axis& a) {
  std::vector<double> out;
  if (a.log) {
    const double step = std::max(1.0, std::ceil((a.hi - a.lo) / 8.0));
    for (double e = a.lo; e <= a.hi + 1e-9; e += step) out.push_back(e);
    return out;
  }
  const double span = a.hi - a.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-12; v += step) {
    out.push_back(std::fabs(v) < 1e-12 * step ? 0.0 : v);
  }
  return out;
}

std::string tick_label(double v, bool log) {
  if (log) return "1e" + fmt(v, "%.0f");
  return fmt(v, "%.3g");
}

// Viridis-like ramp through five anchors.
std::string color(double t) {
  static const double anchors[5][3] = {{68, 1, 84},
                                       {59, 82, 139},
                                       {33, 145, 140},
                                       {94, 201, 98},
                                       {253, 231, 37}};
  if (!std::isfinite(t)) return "#cccccc";
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double w = t - k;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(anchors[k][0] * (1 - w) + anchors[k + 1][0] * w),
                static_cast<int>(anchors[k][1] * (1 - w) + anchors[k + 1][1] * w),
                static_cast<int>(anchors[k][2] * (1 - w) + anchors[k + 1][2] * w));
  return buf;
}

}  // namespace

std::string line_plot(const PlotSpec& spec, std::span<const Series> series) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const Axis ax = make_axis(xs, spec.log_x);
  const Axis ay = make_axis(ys, spec.log_y);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + ax.frac(v) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - ay.frac(v)) * ph; };

  std::string s = header(spec.title);
  s += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" +
       fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : ticks(ax)) {
    const double x = kLeft + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    s += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(x) +
         "\" y2=\"" + fmt(kTop + ph) + "\" stroke=\"#eee\"/>\n";
    s += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(kTop + ph + 16) +
         "\" text-anchor=\"middle\">" + tick_label(t, ax.log) + "</text>\n";
  }
  for (double t : ticks(ay)) {
    const double y = kTop + (1.0 - (t - ay.lo) / (ay.hi - ay.lo)) * ph;
    s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(y) + "\" x2=\"" +
         fmt(kLeft + pw) + "\" y2=\"" + fmt(y) + "\" stroke=\"#eee\"/>\n";
    s += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(y + 4) +
         "\" text-anchor=\"end\">" + tick_label(t, ay.log) + "</text>\n";
  }
  s += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 14) +
       "\" text-anchor=\"middle\">" + escape(spec.xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + fmt(kTop + ph / 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fmt(kTop + ph / 2) + ")\">" + escape(spec.ylabel) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = series[k];
    const std::string col = kColors[k % kColors.size()];
    std::string pts;
    std::string marks;
    for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
      const double x = ser.x[i];
      const double y = ser.y[i];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if ((ax.log && x <= 0.0) || (ay.log && y <= 0.0)) continue;
      pts += fmt(px(x)) + "," + fmt(py(y)) + " ";
      if (ser.markers) {
        marks += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) +
                 "\" r=\"3\" fill=\"" + col + "\"/>\n";
      }
    }
    s += "<polyline fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.6\"";
    if (ser.dashed) s += " stroke-dasharray=\"6 4\"";
    s += " points=\"" + pts + "\"/>\n" + marks;
    const double ly = kTop + 14 + 16 * static_cast<double>(k);
    s += "<line x1=\"" + fmt(kLeft + pw - 150) + "\" y1=\"" + fmt(ly - 4) +
         "\" x2=\"" + fmt(kLeft + pw - 130) + "\" y2=\"" + fmt(ly - 4) +
         "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(kLeft + pw - 124) + "\" y=\"" + fmt(ly) + "\">" +
         escape(ser.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string heatmap(const GridSpec& grid, std::span<const double> values,
                    const std::string& title,
                    std::span<const double> contour_levels) {
  const std::size_t step_x = std::max<std::size_t>(1, (grid.nx + 159) / 160);
  const std::size_t step_y = std::max<std::size_t>(1, (grid.ny + 159) / 160);
  const std::size_t cx = (grid.nx - 1) / step_x + 1;
  const std::size_t cy = (grid.ny - 1) / step_y + 1;
  std::vector<double> v(cx * cy);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = 0; j < cy; ++j) {
    for (std::size_t i = 0; i < cx; ++i) {
      const double val = values[grid.index(i * step_x, j * step_y)];
      v[j * cx + i] = val;
      if (std::isfinite(val)) {
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pw = kWidth - kLeft - kRight - 60;
  const double ph = kHeight - kTop - kBottom;
  const double cw = pw / static_cast<double>(cx);
  const double ch = ph / static_cast<double>(cy);
  std::string s = header(title);
  for (std::size_t j = 0; j < cy; ++j) {
    for (std::size_t i = 0; i < cx; ++i) {
      const double x = kLeft + static_cast<double>(i) * cw;
      const double y = kTop + ph - static_cast<double>(j + 1) * ch;
      s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" +
           fmt(cw + 0.05) + "\" height=\"" + fmt(ch + 0.05) + "\" fill=\"" +
           color((v[j * cx + i] - lo) / (hi - lo)) + "\"/>\n";
    }
  }
  // Isolines through cell centres, one segment per crossing pair.
  auto pos = [&](double i, double j) {
    return std::pair{kLeft + (i + 0.5) * cw, kTop + ph - (j + 0.5) * ch};
  };
  for (double level : contour_levels) {
    std::string path;
    for (std::size_t j = 0; j + 1 < cy; ++j) {
      for (std::size_t i = 0; i + 1 < cx; ++i) {
        const double c[4] = {v[j * cx + i], v[j * cx + i + 1],
                             v[(j + 1) * cx + i + 1], v[(j + 1) * cx + i]};
        const double corner[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        std::vector<std::pair<double, double>> hits;
        for (int e = 0; e < 4; ++e) {
          const double a = c[e];
          const double b = c[(e + 1) % 4];
          if (!std::isfinite(a) || !std::isfinite(b)) continue;
          if ((a < level) == (b < level)) continue;
          const double t = (level - a) / (b - a);
          const double di = corner[e][0] + t * (corner[(e + 1) % 4][0] - corner[e][0]);
          const double dj = corner[e][1] + t * (corner[(e + 1) % 4][1] - corner[e][1]);
          hits.push_back(pos(static_cast<double>(i) + di, static_cast<double>(j) + dj));
        }
        for (std::size_t h = 0; h + 1 < hits.size(); h += 2) {
          path += "M" + fmt(hits[h].first) + " " + fmt(hits[h].second) + "L" +
                  fmt(hits[h + 1].first) + " " + fmt(hits[h + 1].second);
        }
      }
    }
    if (!path.empty()) {
      s += "<path d=\"" + path +
           "\" fill=\"none\" stroke=\"white\" stroke-width=\"1\"/>\n";
    }
  }
  // Colour bar.
  const double bx = kLeft + pw + 16;
  for (int k = 0; k < 50; ++k) {
    const double t = k / 49.0;
    s += "<rect x=\"" + fmt(bx) + "\" y=\"" + fmt(kTop + ph * (1 - t) - ph / 50) +
         "\" width=\"14\" height=\"" + fmt(ph / 50 + 0.5) + "\" fill=\"" +
         color(t) + "\"/>\n";
  }
  s += "<text x=\"" + fmt(bx + 18) + "\" y=\"" + fmt(kTop + 8) + "\">" +
       fmt(hi, "%.3g") + "</text>\n";
  s += "<text x=\"" + fmt(bx + 18) + "\" y=\"" + fmt(kTop + ph) + "\">" +
       fmt(lo, "%.3g") + "</text>\n";
  s += "<text x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop + ph + 18) + "\">x: [" +
       fmt(grid.x0, "%.3g") + ", " + fmt(grid.x1, "%.3g") + "]  y: [" +
       fmt(grid.y0, "%.3g") + ", " + fmt(grid.y1, "%.3g") + "]</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace sublab
