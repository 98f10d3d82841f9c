#include "qevt/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "qevt/error.hpp"

namespace qevt {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
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
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) {
      const double pad = std::max(1e-3, 0.05 * std::abs(lo));
      lo -= pad;
      hi += pad;
    }
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string SvgPlot::render() const {
  Range xr;
  Range yr;
  for (const auto& s : series_) {
    for (double v : s.x) xr.include(v);
    for (double v : s.y) yr.include(v);
  }
  for (const auto& b : bars_) {
    for (double v : b.edges) xr.include(v);
    yr.include(0.0);
    for (double v : b.heights) yr.include(v);
  }
  for (const auto& r : rules_) yr.include(r.y);
  xr.finish();
  yr.finish();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title_) << "</text>\n";

  for (int i = 0; i <= 5; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    svg << "<line x1=\"" << fixed(px(xv)) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(px(xv)) << "\" y2=\""
        << fixed(kTop + ph) << "\" stroke=\"#eeeeee\"/>\n";
    svg << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(py(yv)) << "\" x2=\"" << fixed(kLeft + pw)
        << "\" y2=\"" << fixed(py(yv)) << "\" stroke=\"#eeeeee\"/>\n";
    svg << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << fixed(kTop + ph + 18) << "\" text-anchor=\"middle\">"
        << tick_label(xv) << "</text>\n";
    svg << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(py(yv) + 4) << "\" text-anchor=\"end\">"
        << tick_label(yv) << "</text>\n";
  }

  for (const auto& b : bars_) {
    for (std::size_t i = 0; i < b.heights.size() && i + 1 < b.edges.size(); ++i) {
      const double x0 = px(b.edges[i]);
      const double x1 = px(b.edges[i + 1]);
      const double y0 = py(b.heights[i]);
      const double base = py(0.0);
      svg << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(std::min(y0, base)) << "\" width=\""
          << fixed(std::max(0.0, x1 - x0)) << "\" height=\"" << fixed(std::abs(base - y0)) << "\" fill=\"" << b.color
          << "\" stroke=\"white\"/>\n";
    }
  }

  for (const auto& s : series_) {
    std::ostringstream points;
    bool any = false;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      points << (any ? " " : "") << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i]));
      any = true;
    }
    if (!any) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"" << points.str() << "\"/>\n";
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        svg << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i])) << "\" r=\"3\" fill=\""
            << s.color << "\"/>\n";
      }
    }
  }

  for (const auto& r : rules_) {
    svg << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(py(r.y)) << "\" x2=\"" << fixed(kLeft + pw)
        << "\" y2=\"" << fixed(py(r.y)) << "\" stroke=\"" << r.color << "\" stroke-width=\"1.5\""
        << " stroke-dasharray=\"6,4\"/>\n";
  }

  svg << "<rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\"" << fixed(pw) << "\" height=\""
      << fixed(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 16)
      << "\" text-anchor=\"middle\">" << escape(x_label_) << "</text>\n";
  svg << "<text transform=\"translate(18," << fixed(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label_) << "</text>\n";

  // Legend.
  double ly = kTop + 10;
  const double lx = kLeft + pw + 14;
  auto legend = [&](const std::string& label, const std::string& color, bool dashed) {
    if (label.empty()) return;
    svg << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(lx + 22) << "\" y2=\""
        << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    svg << "<text x=\"" << fixed(lx + 28) << "\" y=\"" << fixed(ly + 4) << "\">" << escape(label) << "</text>\n";
    ly += 18;
  };
  for (const auto& s : series_) legend(s.label, s.color, s.dashed);
  for (const auto& r : rules_) legend(r.label, r.color, true);

  svg << "</svg>\n";
  return svg.str();
}

}  // namespace qevt
