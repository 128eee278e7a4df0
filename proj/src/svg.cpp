#include "vaecert/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vaecert::io {
namespace {

const char* kPalette[] = {"#1f6fb4", "#d9622b", "#3a923a", "#c03d3e", "#8a5db8", "#7f7f7f"};
constexpr int kPaletteSize = 6;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;        // data range
  double px0, px1, py0, py1;    // pixel box (py0 is top)

  double sx(double x) const {
    if (x1 == x0) return 0.5 * (px0 + px1);
    return px0 + (x - x0) / (x1 - x0) * (px1 - px0);
  }
  double sy(double y) const {
    if (y1 == y0) return 0.5 * (py0 + py1);
    return py1 - (y - y0) / (y1 - y0) * (py1 - py0);
  }
};

void expand_range(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
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

void open_svg(std::ostringstream& out, const PlotOptions& opts) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width << "\" height=\""
      << opts.height << "\" viewBox=\"0 0 " << opts.width << " " << opts.height << "\">\n";
  out << "<rect width=\"" << opts.width << "\" height=\"" << opts.height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << opts.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(opts.title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Frame& f, const PlotOptions& opts) {
  out << "<line x1=\"" << fmt(f.px0) << "\" y1=\"" << fmt(f.py1) << "\" x2=\"" << fmt(f.px1)
      << "\" y2=\"" << fmt(f.py1) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt(f.px0) << "\" y1=\"" << fmt(f.py0) << "\" x2=\"" << fmt(f.px0)
      << "\" y2=\"" << fmt(f.py1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double tx = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double ty = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<line x1=\"" << fmt(f.sx(tx)) << "\" y1=\"" << fmt(f.py1) << "\" x2=\""
        << fmt(f.sx(tx)) << "\" y2=\"" << fmt(f.py1 + 4) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(f.sx(tx)) << "\" y=\"" << fmt(f.py1 + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(tx)
        << "</text>\n";
    out << "<line x1=\"" << fmt(f.px0 - 4) << "\" y1=\"" << fmt(f.sy(ty)) << "\" x2=\""
        << fmt(f.px0) << "\" y2=\"" << fmt(f.sy(ty)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(f.px0 - 6) << "\" y=\"" << fmt(f.sy(ty) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(ty)
        << "</text>\n";
  }
  out << "<text x=\"" << fmt(0.5 * (f.px0 + f.px1)) << "\" y=\"" << fmt(f.py1 + 32)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << escape(opts.xlabel) << "</text>\n";
  out << "<text x=\"14\" y=\"" << fmt(0.5 * (f.py0 + f.py1))
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
      << "transform=\"rotate(-90 14 " << fmt(0.5 * (f.py0 + f.py1)) << ")\">"
      << escape(opts.ylabel) << "</text>\n";
}

void no_data(std::ostringstream& out, const PlotOptions& opts) {
  out << "<text x=\"" << opts.width / 2 << "\" y=\"" << opts.height / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "fill=\"#888888\">no data</text>\n";
}

Frame make_frame(const PlotOptions& opts, double x0, double x1, double y0, double y1) {
  Frame f{x0, x1, y0, y1, 56.0, static_cast<double>(opts.width) - 16.0, 34.0,
          static_cast<double>(opts.height) - 44.0};
  return f;
}

}  // namespace

std::string svg_line_chart(const std::vector<Series>& series, const PlotOptions& opts) {
  std::ostringstream out;
  open_svg(out, opts);

  bool any = false;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!any) {
        x0 = x1 = x;
        y0 = y1 = y;
        any = true;
      }
      x0 = std::min(x0, x); x1 = std::max(x1, x);
      y0 = std::min(y0, y); y1 = std::max(y1, y);
    }
  }
  if (!any) {
    Frame f = make_frame(opts, 0, 1, 0, 1);
    draw_axes(out, f, opts);
    no_data(out, opts);
    out << "</svg>\n";
    return out.str();
  }
  expand_range(x0, x1);
  expand_range(y0, y1);
  Frame f = make_frame(opts, x0, x1, y0, y1);
  draw_axes(out, f, opts);

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % kPaletteSize];
    const Series& s = series[si];
    if (!s.points.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) out << fmt(f.sx(x)) << "," << fmt(f.sy(y)) << " ";
      out << "\"/>\n";
      for (const auto& [x, y] : s.points) {
        out << "<circle cx=\"" << fmt(f.sx(x)) << "\" cy=\"" << fmt(f.sy(y))
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
    }
    out << "<rect x=\"" << fmt(f.px0 + 8) << "\" y=\"" << fmt(f.py0 + 6 + 14.0 * si)
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fmt(f.px0 + 22) << "\" y=\"" << fmt(f.py0 + 15 + 14.0 * si)
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_scatter(const std::vector<std::pair<double, double>>& points,
                        const PlotOptions& opts, bool y_equals_x, bool best_fit) {
  std::ostringstream out;
  open_svg(out, opts);
  if (points.empty()) {
    Frame f = make_frame(opts, 0, 1, 0, 1);
    draw_axes(out, f, opts);
    no_data(out, opts);
    out << "</svg>\n";
    return out.str();
  }
  double x0 = points[0].first, x1 = x0, y0 = points[0].second, y1 = y0;
  for (const auto& [x, y] : points) {
    x0 = std::min(x0, x); x1 = std::max(x1, x);
    y0 = std::min(y0, y); y1 = std::max(y1, y);
  }
  if (y_equals_x) {
    // keep the reference line visible across the shared range
    x0 = std::min(x0, y0); y0 = x0;
    x1 = std::max(x1, y1); y1 = x1;
  }
  expand_range(x0, x1);
  expand_range(y0, y1);
  Frame f = make_frame(opts, x0, x1, y0, y1);
  draw_axes(out, f, opts);

  if (y_equals_x) {
    const double lo = std::max(x0, y0), hi = std::min(x1, y1);
    out << "<line x1=\"" << fmt(f.sx(lo)) << "\" y1=\"" << fmt(f.sy(lo)) << "\" x2=\""
        << fmt(f.sx(hi)) << "\" y2=\"" << fmt(f.sy(hi))
        << "\" stroke=\"#c03d3e\" stroke-width=\"1.2\"/>\n";
  }
  if (best_fit && points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(points.size());
    for (const auto& [x, y] : points) {
      sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (denom != 0.0) {
      const double slope = (n * sxy - sx * sy) / denom;
      const double icept = (sy - slope * sx) / n;
      out << "<line x1=\"" << fmt(f.sx(x0)) << "\" y1=\"" << fmt(f.sy(icept + slope * x0))
          << "\" x2=\"" << fmt(f.sx(x1)) << "\" y2=\"" << fmt(f.sy(icept + slope * x1))
          << "\" stroke=\"#d9622b\" stroke-width=\"1.2\" stroke-dasharray=\"5,3\"/>\n";
    }
  }
  for (const auto& [x, y] : points) {
    out << "<circle cx=\"" << fmt(f.sx(x)) << "\" cy=\"" << fmt(f.sy(y))
        << "\" r=\"3\" fill=\"#1f6fb4\" fill-opacity=\"0.75\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_bar_chart(const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::vector<double>& errors,
                          const PlotOptions& opts) {
  std::ostringstream out;
  open_svg(out, opts);
  if (values.empty()) {
    Frame f = make_frame(opts, 0, 1, 0, 1);
    draw_axes(out, f, opts);
    no_data(out, opts);
    out << "</svg>\n";
    return out.str();
  }
  double y0 = 0.0, y1 = values[0];
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double e = i < errors.size() ? errors[i] : 0.0;
    y0 = std::min(y0, values[i] - e);
    y1 = std::max(y1, values[i] + e);
  }
  expand_range(y0, y1);
  Frame f = make_frame(opts, 0, static_cast<double>(values.size()), y0, y1);
  draw_axes(out, f, opts);

  for (std::size_t i = 0; i < values.size(); ++i) {
    const double cx = static_cast<double>(i) + 0.5;
    const double w = 0.6;
    const double xl = f.sx(cx - w / 2), xr = f.sx(cx + w / 2);
    const double base = f.sy(std::max(0.0, y0));
    const double top = f.sy(values[i]);
    out << "<rect x=\"" << fmt(xl) << "\" y=\"" << fmt(std::min(top, base)) << "\" width=\""
        << fmt(xr - xl) << "\" height=\"" << fmt(std::abs(base - top)) << "\" fill=\""
        << kPalette[i % kPaletteSize] << "\" fill-opacity=\"0.85\"/>\n";
    if (i < errors.size() && errors[i] > 0.0) {
      out << "<line x1=\"" << fmt(f.sx(cx)) << "\" y1=\"" << fmt(f.sy(values[i] - errors[i]))
          << "\" x2=\"" << fmt(f.sx(cx)) << "\" y2=\"" << fmt(f.sy(values[i] + errors[i]))
          << "\" stroke=\"black\"/>\n";
    }
    if (i < labels.size()) {
      out << "<text x=\"" << fmt(f.sx(cx)) << "\" y=\"" << fmt(f.py1 + 28)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
          << escape(labels[i]) << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_box_summary(const std::vector<std::string>& labels,
                            const std::vector<std::vector<double>>& groups,
                            const PlotOptions& opts) {
  std::ostringstream out;
  open_svg(out, opts);
  bool any = false;
  double y0 = 0, y1 = 0;
  for (const auto& g : groups) {
    for (double v : g) {
      if (!any) {
        y0 = y1 = v;
        any = true;
      }
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (!any) {
    Frame f = make_frame(opts, 0, 1, 0, 1);
    draw_axes(out, f, opts);
    no_data(out, opts);
    out << "</svg>\n";
    return out.str();
  }
  expand_range(y0, y1);
  Frame f = make_frame(opts, 0, static_cast<double>(groups.size()), y0, y1);
  draw_axes(out, f, opts);

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    std::vector<double> v = groups[gi];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    auto q = [&v](double p) {
      const double pos = p * static_cast<double>(v.size() - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(i);
      return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v.back();
    };
    const double cx = static_cast<double>(gi) + 0.5;
    const double w = 0.5;
    const char* color = kPalette[gi % kPaletteSize];
    out << "<line x1=\"" << fmt(f.sx(cx)) << "\" y1=\"" << fmt(f.sy(v.front())) << "\" x2=\""
        << fmt(f.sx(cx)) << "\" y2=\"" << fmt(f.sy(v.back())) << "\" stroke=\"" << color
        << "\"/>\n";
    out << "<rect x=\"" << fmt(f.sx(cx - w / 2)) << "\" y=\"" << fmt(f.sy(q(0.75)))
        << "\" width=\"" << fmt(f.sx(cx + w / 2) - f.sx(cx - w / 2)) << "\" height=\""
        << fmt(f.sy(q(0.25)) - f.sy(q(0.75))) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.4\" stroke=\"" << color << "\"/>\n";
    out << "<line x1=\"" << fmt(f.sx(cx - w / 2)) << "\" y1=\"" << fmt(f.sy(q(0.5)))
        << "\" x2=\"" << fmt(f.sx(cx + w / 2)) << "\" y2=\"" << fmt(f.sy(q(0.5)))
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    if (gi < labels.size()) {
      out << "<text x=\"" << fmt(f.sx(cx)) << "\" y=\"" << fmt(f.py1 + 28)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
          << escape(labels[gi]) << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace vaecert::io
