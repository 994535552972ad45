#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace cael::harness::svg {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 24;
constexpr int kMarginBottom = 56;
constexpr double kLogFloor = 1e-12;  // plotted stand-in for zero values

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Canvas {
  std::ostringstream body;

  std::string finish() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
       << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
       << kHeight << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body.str() << "</svg>\n";
    return os.str();
  }

  void line(double x1, double y1, double x2, double y2,
            const std::string& color, double width = 1.0) {
    body << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\""
         << fmt(x2) << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << color
         << "\" stroke-width=\"" << fmt(width) << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& color, double width = 2.0) {
    body << "<polyline fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"" << fmt(width) << "\" points=\"";
    for (const auto& [x, y] : pts) body << fmt(x) << "," << fmt(y) << " ";
    body << "\"/>\n";
  }

  void polygon(const std::vector<std::pair<double, double>>& pts,
               const std::string& color, double opacity) {
    body << "<polygon fill=\"" << color << "\" fill-opacity=\""
         << fmt(opacity) << "\" stroke=\"none\" points=\"";
    for (const auto& [x, y] : pts) body << fmt(x) << "," << fmt(y) << " ";
    body << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& color) {
    body << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
         << fmt(w) << "\" height=\"" << fmt(h) << "\" fill=\"" << color
         << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& anchor = "middle",
            const std::string& color = "#333") {
    body << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y)
         << "\" font-family=\"sans-serif\" font-size=\"" << size
         << "\" text-anchor=\"" << anchor << "\" fill=\"" << color << "\">"
         << s << "</text>\n";
  }
};

struct LogAxisY {
  double lo_exp = 0.0;
  double hi_exp = 1.0;

  static LogAxisY fit(std::vector<double> values) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values) {
      const double c = std::max(v, kLogFloor);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    if (!std::isfinite(lo)) {
      lo = kLogFloor;
      hi = 1.0;
    }
    LogAxisY ax;
    ax.lo_exp = std::floor(std::log10(lo));
    ax.hi_exp = std::ceil(std::log10(hi));
    if (ax.hi_exp <= ax.lo_exp) ax.hi_exp = ax.lo_exp + 1.0;
    return ax;
  }

  double y(double value) const {
    const double e = std::log10(std::max(value, kLogFloor));
    const double t = (e - lo_exp) / (hi_exp - lo_exp);
    return kHeight - kMarginBottom -
           t * (kHeight - kMarginTop - kMarginBottom);
  }

  void draw(Canvas& c, const std::string& label) const {
    c.line(kMarginLeft, kMarginTop, kMarginLeft, kHeight - kMarginBottom,
           "#333");
    for (int e = static_cast<int>(lo_exp); e <= static_cast<int>(hi_exp);
         ++e) {
      const double yy = y(std::pow(10.0, e));
      c.line(kMarginLeft - 4, yy, kWidth - kMarginRight, yy, "#ddd", 0.5);
      std::ostringstream t;
      t << "1e" << e;
      c.text(kMarginLeft - 8, yy + 4, t.str(), 11, "end");
    }
    c.text(16, kMarginTop - 8, label, 12, "start");
  }
};

std::map<std::string, int> color_index(const std::vector<std::string>& names) {
  std::map<std::string, int> idx;
  int next = 0;
  for (const std::string& n : names) {
    if (!idx.count(n)) idx[n] = next++ % 6;
  }
  return idx;
}

void legend(Canvas& c, const std::vector<std::string>& names,
            const std::map<std::string, int>& colors) {
  double x = kMarginLeft + 8;
  const double y = kMarginTop + 6;
  for (const std::string& n : names) {
    c.rect(x, y - 8, 12, 12, kPalette[colors.at(n)]);
    c.text(x + 16, y + 2, n, 12, "start");
    x += 16 + 9.0 * static_cast<double>(n.size()) + 24;
  }
}

}  // namespace

std::string metric_bars(const std::vector<MetricsRow>& rows) {
  Canvas c;
  std::vector<double> vals;
  for (const MetricsRow& r : rows) {
    vals.insert(vals.end(), {r.bias_sq, r.variance, r.mse});
  }
  const LogAxisY ax = LogAxisY::fit(vals);
  ax.draw(c, "value (log scale)");

  const char* metric_names[3] = {"bias^2", "variance", "mse"};
  const char* metric_colors[3] = {"#1f77b4", "#ff7f0e", "#d62728"};
  const double span = kWidth - kMarginLeft - kMarginRight;
  const double group = span / std::max<std::size_t>(rows.size(), 1);
  const double bar = group / 4.0;
  const double base = kHeight - kMarginBottom;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double gx = kMarginLeft + group * static_cast<double>(i);
    const double metrics[3] = {rows[i].bias_sq, rows[i].variance, rows[i].mse};
    for (int m = 0; m < 3; ++m) {
      const double top = ax.y(metrics[m]);
      c.rect(gx + bar * (0.5 + m), top, bar * 0.9, base - top,
             metric_colors[m]);
    }
    c.text(gx + group / 2.0, base + 18, rows[i].estimator, 12);
  }
  double lx = kMarginLeft + 8;
  for (int m = 0; m < 3; ++m) {
    c.rect(lx, kMarginTop - 2, 12, 12, metric_colors[m]);
    c.text(lx + 16, kMarginTop + 8, metric_names[m], 12, "start");
    lx += 100;
  }
  return c.finish();
}

std::string sweep_lines(const std::vector<MetricsRow>& rows,
                        const std::string& param, bool log_x) {
  Canvas c;
  std::vector<double> vals;
  std::vector<double> xs;
  std::vector<std::string> names;
  for (const MetricsRow& r : rows) {
    vals.insert(vals.end(), {r.mse, r.ci_low, r.ci_high});
    xs.push_back(r.sweep_value);
    if (std::find(names.begin(), names.end(), r.estimator) == names.end()) {
      names.push_back(r.estimator);
    }
  }
  const LogAxisY ax = LogAxisY::fit(vals);
  ax.draw(c, "mse (log scale)");

  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  const double xlo = xs.front();
  const double xhi = xs.back();
  auto xpos = [&](double v) {
    double t = 0.5;
    if (xhi > xlo) {
      t = log_x ? (std::log(v) - std::log(xlo)) /
                      (std::log(xhi) - std::log(xlo))
                : (v - xlo) / (xhi - xlo);
    }
    return kMarginLeft + t * (kWidth - kMarginLeft - kMarginRight);
  };
  const double base = kHeight - kMarginBottom;
  c.line(kMarginLeft, base, kWidth - kMarginRight, base, "#333");
  for (double v : xs) {
    c.text(xpos(v), base + 18, fmt(v), 11);
  }
  c.text(kWidth / 2.0, kHeight - 12, param, 12);

  const auto colors = color_index(names);
  for (const std::string& name : names) {
    std::vector<std::pair<double, double>> pts;
    std::vector<std::pair<double, double>> band;
    std::vector<std::pair<double, double>> band_back;
    for (const MetricsRow& r : rows) {
      if (r.estimator != name) continue;
      pts.emplace_back(xpos(r.sweep_value), ax.y(r.mse));
      band.emplace_back(xpos(r.sweep_value), ax.y(r.ci_high));
      band_back.emplace_back(xpos(r.sweep_value), ax.y(r.ci_low));
    }
    std::vector<std::pair<double, double>> poly = band;
    poly.insert(poly.end(), band_back.rbegin(), band_back.rend());
    const std::string color = kPalette[colors.at(name)];
    if (poly.size() >= 3) c.polygon(poly, color, 0.15);
    c.polyline(pts, color);
  }
  legend(c, names, colors);
  return c.finish();
}

std::string cdf_steps(const std::vector<CdfTable>& tables) {
  Canvas c;
  double rlo = 1e300, rhi = -1e300;
  std::vector<std::string> names;
  for (const CdfTable& t : tables) {
    names.push_back(t.estimator);
    for (double r : t.ratios) {
      const double cl = std::max(r, kLogFloor);
      rlo = std::min(rlo, cl);
      rhi = std::max(rhi, cl);
    }
  }
  if (rlo > rhi) {
    rlo = 0.01;
    rhi = 10.0;
  }
  rlo = std::min(rlo, 0.5);
  rhi = std::max(rhi, 2.0);
  const double llo = std::floor(std::log10(rlo));
  const double lhi = std::ceil(std::log10(rhi));
  auto xpos = [&](double r) {
    const double t = (std::log10(std::max(r, kLogFloor)) - llo) / (lhi - llo);
    return kMarginLeft + t * (kWidth - kMarginLeft - kMarginRight);
  };
  auto ypos = [&](double p) {
    return kHeight - kMarginBottom -
           p * (kHeight - kMarginTop - kMarginBottom);
  };

  c.line(kMarginLeft, kMarginTop, kMarginLeft, ypos(0.0), "#333");
  c.line(kMarginLeft, ypos(0.0), kWidth - kMarginRight, ypos(0.0), "#333");
  for (double p = 0.0; p <= 1.0001; p += 0.25) {
    c.line(kMarginLeft - 4, ypos(p), kWidth - kMarginRight, ypos(p), "#ddd",
           0.5);
    c.text(kMarginLeft - 8, ypos(p) + 4, fmt(p), 11, "end");
  }
  for (int e = static_cast<int>(llo); e <= static_cast<int>(lhi); ++e) {
    const double x = xpos(std::pow(10.0, e));
    c.line(x, kMarginTop, x, ypos(0.0), "#eee", 0.5);
    std::ostringstream t;
    t << "1e" << e;
    c.text(x, ypos(0.0) + 18, t.str(), 11);
  }
  c.line(xpos(1.0), kMarginTop, xpos(1.0), ypos(0.0), "#999", 1.0);
  c.text(kWidth / 2.0, kHeight - 12,
         "squared error relative to the baseline (log scale)", 12);

  const auto colors = color_index(names);
  for (const CdfTable& t : tables) {
    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(xpos(std::pow(10.0, llo)), ypos(0.0));
    const std::size_t n = t.ratios.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double y = static_cast<double>(i + 1) / static_cast<double>(n);
      pts.emplace_back(xpos(t.ratios[i]), ypos(static_cast<double>(i) /
                                               static_cast<double>(n)));
      pts.emplace_back(xpos(t.ratios[i]), ypos(y));
    }
    pts.emplace_back(xpos(std::pow(10.0, lhi)), ypos(1.0));
    c.polyline(pts, kPalette[colors.at(t.estimator)], 1.8);
  }
  legend(c, names, colors);
  return c.finish();
}

}  // namespace cael::harness::svg
