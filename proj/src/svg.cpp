#include "icgp/svg.hpp"

#include "icgp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace icgp::svg {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_text(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e5))
    std::snprintf(buf, sizeof buf, "%.0e", v);
  else
    std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

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

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double t(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (t(v) - lo) / (hi - lo); }

  void fit(const std::vector<double>& vals) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (double v : vals)
      if (usable(v)) {
        mn = std::min(mn, t(v));
        mx = std::max(mx, t(v));
      }
    if (!std::isfinite(mn)) mn = 0.0, mx = 1.0;
    if (mx - mn < 1e-12) {
      const double pad = log ? 0.5 : std::max(1e-12, std::abs(mn) * 0.1 + 0.5);
      mn -= pad;
      mx += pad;
    }
    if (log) {
      lo = std::floor(mn);
      hi = std::ceil(mx);
    } else {
      const double pad = 0.05 * (mx - mn);
      lo = mn - pad;
      hi = mx + pad;
    }
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 8)));
      for (double e = lo; e <= hi + 1e-9; e += step) out.push_back(std::pow(10.0, e));
      return out;
    }
    const double raw = (hi - lo) / 6;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return out;
  }
};

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" "
         "fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\"" + extra + ">" + escape(s) + "</text>\n";
}

// Blue-to-yellow ramp.
std::string ramp(double f) {
  f = std::clamp(f, 0.0, 1.0);
  const int r = static_cast<int>(68 + f * (253 - 68));
  const int g = static_cast<int>(1 + f * (231 - 1));
  const int b = static_cast<int>(84 + f * (37 - 84));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string render(const LinePlot& plot) {
  Axis ax{plot.log_x}, ay{plot.log_y};
  std::vector<double> xs, ys;
  for (const auto& s : plot.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  ax.fit(xs);
  ay.fit(ys);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + ax.frac(v) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - ay.frac(v)) * ph; };

  std::string out = header(kWidth, kHeight);
  out += text(kWidth / 2 - kRight / 2, 24, plot.title, " text-anchor=\"middle\" font-size=\"14\"");
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : ax.ticks()) {
    const double x = px(v);
    out += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(x) + "\" y2=\"" +
           num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    out += text(x, kTop + ph + 18, tick_text(v), " text-anchor=\"middle\"");
  }
  for (double v : ay.ticks()) {
    const double y = py(v);
    out += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft + pw) +
           "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
    out += text(kLeft - 8, y + 4, tick_text(v), " text-anchor=\"end\"");
  }
  out += text(kLeft + pw / 2, kHeight - 16, plot.x_label, " text-anchor=\"middle\"");
  out += text(18, kTop + ph / 2, plot.y_label,
              " text-anchor=\"middle\" transform=\"rotate(-90 18 " + num(kTop + ph / 2) + ")\"");

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const Series& s = plot.series[k];
    const std::string color = kPalette[k % std::size(kPalette)];
    const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) {
        pen = false;
        continue;
      }
      path += (pen ? " L" : " M") + num(px(s.x[i])) + " " + num(py(s.y[i]));
      pen = true;
      out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"2.5\" fill=\"" +
             color + "\"/>\n";
    }
    if (!path.empty())
      out += "<path d=\"" + path.substr(1) + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.5\"" + dash + "/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    out += "<line x1=\"" + num(kWidth - kRight + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
           num(kWidth - kRight + 36) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"" + dash + "/>\n";
    out += text(kWidth - kRight + 42, ly, s.name);
  }
  return out + "</svg>\n";
}

std::string render(const Heatmap& map) {
  const auto R = map.values.rows(), C = map.values.cols();
  const double cell = 48, left = 90, top = 50;
  const double w = left + cell * static_cast<double>(C) + 140;
  const double h = top + cell * static_cast<double>(R) + 60;
  auto tr = [&](double v) { return map.log_scale ? std::log10(v) : v; };
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < R; ++i)
    for (Eigen::Index j = 0; j < C; ++j) {
      const double v = map.values(i, j);
      if (std::isfinite(v) && (!map.log_scale || v > 0.0)) {
        lo = std::min(lo, tr(v));
        hi = std::max(hi, tr(v));
      }
    }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) hi = lo + 1.0;

  std::string out = header(w, h);
  out += text(w / 2, 24, map.title, " text-anchor=\"middle\" font-size=\"14\"");
  for (Eigen::Index i = 0; i < R; ++i) {
    const double y = top + cell * static_cast<double>(i);
    if (static_cast<std::size_t>(i) < map.row_names.size())
      out += text(left - 8, y + cell / 2 + 4, map.row_names[i], " text-anchor=\"end\"");
    for (Eigen::Index j = 0; j < C; ++j) {
      const double x = left + cell * static_cast<double>(j);
      const double v = map.values(i, j);
      const bool ok = std::isfinite(v) && (!map.log_scale || v > 0.0);
      const std::string fill = ok ? ramp((tr(v) - lo) / (hi - lo)) : "#bbbbbb";
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" +
             num(cell) + "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      out += text(x + cell / 2, y + cell / 2 + 4, ok ? tick_text(v) : "n/a",
                  " text-anchor=\"middle\" font-size=\"9\"");
    }
  }
  for (Eigen::Index j = 0; j < C; ++j)
    if (static_cast<std::size_t>(j) < map.col_names.size())
      out += text(left + cell * (static_cast<double>(j) + 0.5), top + cell * static_cast<double>(R) + 18,
                  map.col_names[j], " text-anchor=\"middle\"");
  out += text(left + cell * static_cast<double>(C) / 2, top + cell * static_cast<double>(R) + 40,
              map.col_label, " text-anchor=\"middle\"");
  out += text(16, top + cell * static_cast<double>(R) / 2, map.row_label,
              " text-anchor=\"middle\" transform=\"rotate(-90 16 " +
                  num(top + cell * static_cast<double>(R) / 2) + ")\"");
  const double lx = left + cell * static_cast<double>(C) + 30;
  for (int k = 0; k < 10; ++k)
    out += "<rect x=\"" + num(lx) + "\" y=\"" + num(top + 16.0 * (9 - k)) +
           "\" width=\"16\" height=\"16\" fill=\"" + ramp(k / 9.0) + "\"/>\n";
  const std::string unit = map.log_scale ? "log10 " : "";
  out += text(lx + 22, top + 12, unit + tick_text(hi));
  out += text(lx + 22, top + 160, unit + tick_text(lo));
  return out + "</svg>\n";
}

void write_file(const std::string& path, const std::string& svg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << svg;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace icgp::svg
