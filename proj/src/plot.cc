#include "mvtap/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mvtap/error.h"

namespace mvtap {
namespace {

constexpr double kWidth = 480;
constexpr double kHeight = 320;
constexpr double kLeft = 56;
constexpr double kRight = 120;
constexpr double kTop = 32;
constexpr double kBottom = 44;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string Num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::string Tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

std::string Escape(const std::string& s) {
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

// XML comments may not contain "--".
std::string CommentSafe(const std::string& s) {
  std::string out = s;
  for (size_t i = out.find("--"); i != std::string::npos; i = out.find("--")) {
    out.replace(i, 2, "- -");
  }
  return out;
}

}  // namespace

std::string SeriesToTsv(const std::vector<Series>& series,
                        const std::vector<std::string>& comments) {
  std::ostringstream os;
  for (const auto& c : comments) os << "# " << c << '\n';
  os << "series\tx\ty\n";
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) {
      throw Error(ErrorCode::kShapeMismatch, "series '" + s.name + "' x/y sizes");
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      char buf[64];
      if (s.y[i]) {
        std::snprintf(buf, sizeof(buf), "%g\t%.4f", s.x[i], *s.y[i]);
      } else {
        std::snprintf(buf, sizeof(buf), "%g\tnan", s.x[i]);
      }
      os << s.name << '\t' << buf << '\n';
    }
  }
  return os.str();
}

std::string LinePlotSvg(const std::vector<Series>& series, const PlotSpec& spec) {
  auto tx = [&](double x) { return spec.log2_x ? std::log2(x) : x; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) {
      throw Error(ErrorCode::kShapeMismatch, "series '" + s.name + "' x/y sizes");
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      if (s.y[i]) {
        y0 = std::min(y0, *s.y[i]);
        y1 = std::max(y1, *s.y[i]);
      }
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (spec.y_min) y0 = *spec.y_min;
  if (spec.y_max) y1 = *spec.y_max;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (const auto& c : spec.comments) os << "<!-- " << CommentSafe(c) << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << Num(kLeft + pw / 2) << "\" y=\"18\" text-anchor=\"middle\""
     << " font-size=\"13\">" << Escape(spec.title) << "</text>\n";
  os << "<rect x=\"" << Num(kLeft) << "\" y=\"" << Num(kTop) << "\" width=\""
     << Num(pw) << "\" height=\"" << Num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  // X ticks at the data positions of the first series, y ticks at 5 levels.
  if (!series.empty()) {
    for (double x : series.front().x) {
      os << "<text x=\"" << Num(px(x)) << "\" y=\"" << Num(kTop + ph + 14)
         << "\" text-anchor=\"middle\">" << Tick(x) << "</text>\n";
    }
  }
  for (int k = 0; k <= 4; ++k) {
    const double y = y0 + (y1 - y0) * k / 4.0;
    os << "<line x1=\"" << Num(kLeft) << "\" x2=\"" << Num(kLeft + pw)
       << "\" y1=\"" << Num(py(y)) << "\" y2=\"" << Num(py(y))
       << "\" stroke=\"#dddddd\"/>\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", y);
    os << "<text x=\"" << Num(kLeft - 4) << "\" y=\"" << Num(py(y) + 4)
       << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  os << "<text x=\"" << Num(kLeft + pw / 2) << "\" y=\"" << Num(kHeight - 8)
     << "\" text-anchor=\"middle\">" << Escape(spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(14," << Num(kTop + ph / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(spec.y_label)
     << "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    const Series& ser = series[s];
    std::string path;
    bool pen_down = false;
    for (size_t i = 0; i < ser.x.size(); ++i) {
      if (!ser.y[i]) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L " : " M ") + Num(px(ser.x[i])) + " " +
              Num(py(*ser.y[i]));
      pen_down = true;
    }
    if (!path.empty()) {
      os << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\""
         << color << "\" stroke-width=\"1.5\"/>\n";
    }
    for (size_t i = 0; i < ser.x.size(); ++i) {
      if (!ser.y[i]) continue;
      os << "<circle cx=\"" << Num(px(ser.x[i])) << "\" cy=\""
         << Num(py(*ser.y[i])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 8 + 16 * static_cast<double>(s);
    os << "<line x1=\"" << Num(kLeft + pw + 10) << "\" x2=\""
       << Num(kLeft + pw + 26) << "\" y1=\"" << Num(ly) << "\" y2=\"" << Num(ly)
       << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << Num(kLeft + pw + 30) << "\" y=\"" << Num(ly + 4)
       << "\">" << Escape(ser.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace mvtap
