#include "plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hwnas::cli {

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

struct Range {
  double lo, hi;
  [[nodiscard]] double at(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }
};

Range padded(double lo, double hi) {
  const double pad = hi > lo ? 0.08 * (hi - lo) : std::max(std::abs(lo) * 0.1, 1e-12);
  return {lo - pad, hi + pad};
}

}  // namespace

std::vector<std::string> legend_entries(const std::vector<Point>& pts) {
  std::vector<std::string> out;
  for (const auto& p : pts) {
    if (std::find(out.begin(), out.end(), p.series) == out.end()) {
      out.push_back(p.series);
    }
  }
  return out;
}

std::string scatter_svg(const std::vector<Point>& pts, const std::string& title, const std::string& x_label,
                        const std::string& y_label) {
  constexpr double W = 640, H = 440, L = 80, R = 170, T = 40, B = 60;
  const double pw = W - L - R, ph = H - T - B;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (!pts.empty()) {
    auto [xa, xb] = std::minmax_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.x < b.x; });
    auto [ya, yb] = std::minmax_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.y < b.y; });
    xlo = xa->x, xhi = xb->x, ylo = ya->y, yhi = yb->y;
  }
  const auto xr = padded(xlo, xhi), yr = padded(ylo, yhi);
  const auto series = legend_entries(pts);

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << px(L + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double f = k / 4.0;
    const double gx = L + f * pw, gy = T + ph - f * ph;
    s << "<text x=\"" << px(gx) << "\" y=\"" << px(T + ph + 16) << "\" text-anchor=\"middle\">"
      << num(xr.lo + f * (xr.hi - xr.lo)) << "</text>\n";
    s << "<text x=\"" << px(L - 6) << "\" y=\"" << px(gy + 4) << "\" text-anchor=\"end\">"
      << num(yr.lo + f * (yr.hi - yr.lo)) << "</text>\n";
  }
  s << "<text x=\"" << px(L + pw / 2) << "\" y=\"" << px(H - 16) << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  s << "<text transform=\"translate(18," << px(T + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  for (const auto& p : pts) {
    const auto idx = std::find(series.begin(), series.end(), p.series) - series.begin();
    s << "<circle cx=\"" << px(L + xr.at(p.x) * pw) << "\" cy=\"" << px(T + ph - yr.at(p.y) * ph)
      << "\" r=\"5\" fill=\"" << kPalette[static_cast<std::size_t>(idx) % kPalette.size()] << "\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double ly = T + 10 + 20.0 * static_cast<double>(i);
    s << "<circle cx=\"" << px(L + pw + 20) << "\" cy=\"" << px(ly) << "\" r=\"5\" fill=\"" << kPalette[i % kPalette.size()] << "\"/>\n";
    s << "<text class=\"legend\" x=\"" << px(L + pw + 32) << "\" y=\"" << px(ly + 4) << "\">" << escape(series[i]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string heatmap_svg(const std::vector<std::vector<double>>& cells, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
  const std::size_t rows = cells.size(), cols = rows ? cells.front().size() : 0;
  constexpr double L = 60, T = 40, B = 50, R = 90, cw = 14, ch = 10;
  const double W = L + R + cw * static_cast<double>(cols), H = T + B + ch * static_cast<double>(rows);
  double hi = 0.0;
  for (const auto& r : cells) {
    for (double v : r) {
      hi = std::max(hi, v);
    }
  }
  auto colour = [&](double v) {
    const double f = hi > 0 ? std::clamp(v / hi, 0.0, 1.0) : 0.0;
    const int r = static_cast<int>(std::lround(240 - 40 * f)), g = static_cast<int>(std::lround(240 * (1 - f))),
              b = static_cast<int>(std::lround(240 * (1 - f)));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(W) << "\" height=\"" << px(H) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << px(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      s << "<rect class=\"cell\" x=\"" << px(L + cw * static_cast<double>(c)) << "\" y=\"" << px(T + ch * static_cast<double>(r))
        << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"" << colour(cells[r][c]) << "\"/>\n";
    }
  }
  s << "<text x=\"" << px(L + cw * static_cast<double>(cols) / 2) << "\" y=\"" << px(H - 18) << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  s << "<text transform=\"translate(20," << px(T + ch * static_cast<double>(rows) / 2) << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  // Colour bar.
  const double bx = L + cw * static_cast<double>(cols) + 20;
  for (int k = 0; k < 10; ++k) {
    s << "<rect x=\"" << px(bx) << "\" y=\"" << px(T + 12.0 * (9 - k)) << "\" width=\"14\" height=\"12\" fill=\"" << colour(hi * k / 9.0) << "\"/>\n";
  }
  s << "<text x=\"" << px(bx + 18) << "\" y=\"" << px(T + 10) << "\">" << num(hi) << "</text>\n";
  s << "<text x=\"" << px(bx + 18) << "\" y=\"" << px(T + 118) << "\">0</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace hwnas::cli
