#include "lmsrisk/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "lmsrisk/random.hpp"

namespace lmsrisk::svg {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
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

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& xl, const std::string& yl) {
  o << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(f.y0)) << "\" x2=\"" << num(f.px(f.x1))
    << "\" y2=\"" << num(f.py(f.y0)) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(f.y0)) << "\" x2=\"" << num(f.px(f.x0))
    << "\" y2=\"" << num(f.py(f.y1)) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 5.0, y = f.y0 + (f.y1 - f.y0) * i / 5.0;
    o << "<text x=\"" << num(f.px(x)) << "\" y=\"" << num(f.py(f.y0) + 16) << "\" text-anchor=\"middle\">" << tick(x)
      << "</text>\n";
    o << "<text x=\"" << num(f.px(f.x0) - 6) << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\">" << tick(y)
      << "</text>\n";
  }
  o << "<text x=\"" << num((f.px(f.x0) + f.px(f.x1)) / 2) << "\" y=\"" << kHeight - 20 << "\" text-anchor=\"middle\">"
    << escape(xl) << "</text>\n";
  o << "<text transform=\"translate(18," << num((f.py(f.y0) + f.py(f.y1)) / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string line_chart(const LineChart& c) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : c.series)
    for (const auto& [x, y] : s.points) x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  if (!(x1 > x0)) x0 = std::isfinite(x0) ? x0 - 1 : 0, x1 = x0 + 2;
  if (!(y1 > y0)) y0 = std::isfinite(y0) ? y0 - 1 : 0, y1 = y0 + 2;
  if (c.diagonal) x0 = y0 = 0, x1 = y1 = 1;
  const Frame f{x0, x1, y0, y1};
  std::ostringstream o;
  header(o, c.title);
  axes(o, f, c.x_label, c.y_label);
  if (c.diagonal) {
    o << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(1)) << "\" y2=\""
      << num(f.py(1)) << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  }
  if (!std::isnan(c.marker_x)) {
    o << "<line x1=\"" << num(f.px(c.marker_x)) << "\" y1=\"" << num(f.py(y0)) << "\" x2=\"" << num(f.px(c.marker_x))
      << "\" y2=\"" << num(f.py(y1)) << "\" stroke=\"#d62728\" stroke-dasharray=\"6 3\"/>\n";
    o << "<text x=\"" << num(f.px(c.marker_x) + 4) << "\" y=\"" << num(f.py(y1) + 12) << "\" fill=\"#d62728\">"
      << escape(c.marker_label) << "</text>\n";
  }
  for (std::size_t s = 0; s < c.series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : c.series[s].points) o << num(f.px(x)) << ',' << num(f.py(y)) << ' ';
    o << "\"/>\n";
    if (c.series.size() > 1 || !c.series[s].name.empty()) {
      const double ly = kTop + 8 + 16.0 * static_cast<double>(s);
      o << "<rect x=\"" << num(kWidth - 190) << "\" y=\"" << num(ly) << "\" width=\"12\" height=\"3\" fill=\"" << color
        << "\"/><text x=\"" << num(kWidth - 172) << "\" y=\"" << num(ly + 5) << "\">" << escape(c.series[s].name)
        << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string grouped_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                              const std::vector<BarGroup>& groups, double y_max) {
  const Frame f{0, 1, 0, y_max > 0 ? y_max : 1};
  std::ostringstream o;
  header(o, title);
  axes(o, f, "cluster", "mean value");
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(categories.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t c = 0; c < groups[g].values.size() && c < categories.size(); ++c) {
      const double v = groups[g].values[c];
      const double top = f.py(std::clamp(v, 0.0, f.y1));
      o << "<rect x=\"" << num(gx + bar_w * static_cast<double>(c)) << "\" y=\"" << num(top) << "\" width=\""
        << num(bar_w * 0.95) << "\" height=\"" << num(f.py(0) - top) << "\" fill=\"" << kPalette[c % std::size(kPalette)]
        << "\"/>\n";
    }
    o << "<text x=\"" << num(gx + group_w * 0.4) << "\" y=\"" << num(f.py(0) + 30) << "\" text-anchor=\"middle\">"
      << escape(groups[g].label) << "</text>\n";
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double ly = kTop + 4 + 14.0 * static_cast<double>(c);
    o << "<rect x=\"" << num(kWidth - 260) << "\" y=\"" << num(ly) << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[c % std::size(kPalette)] << "\"/><text x=\"" << num(kWidth - 245) << "\" y=\"" << num(ly + 9)
      << "\" font-size=\"10\">" << escape(categories[c]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string shap_summary(const ShapReport& r) {
  double lim = 1e-12;
  for (const auto& p : r.phi)
    for (double v : p) lim = std::max(lim, std::abs(v));
  const Frame f{-lim, lim, 0, static_cast<double>(kNumFeatures)};
  std::ostringstream o;
  header(o, "SHAP summary: " + r.model);
  axes(o, f, "SHAP value (impact on at-risk probability)", "");
  std::array<std::size_t, kNumFeatures> order;
  for (std::size_t f2 = 0; f2 < kNumFeatures; ++f2) order[static_cast<std::size_t>(r.rank[f2] - 1)] = f2;
  Rng jitter(0x5A4B);
  for (std::size_t row = 0; row < kNumFeatures; ++row) {
    const std::size_t feat = order[row];
    const double center = static_cast<double>(kNumFeatures - row) - 0.5;
    o << "<text x=\"" << num(kLeft + 4) << "\" y=\"" << num(f.py(center + 0.42)) << "\" font-size=\"10\">"
      << escape(std::string(kFeatureNames[feat])) << "</text>\n";
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& x : r.instances) lo = std::min(lo, x[feat]), hi = std::max(hi, x[feat]);
    for (std::size_t i = 0; i < r.phi.size(); ++i) {
      const double t = hi > lo ? (r.instances[i][feat] - lo) / (hi - lo) : 0.5;
      const int red = static_cast<int>(std::lround(30 + 200 * t)), blue = static_cast<int>(std::lround(230 - 200 * t));
      const double y = center + (jitter.uniform() - 0.5) * 0.6;
      o << "<circle cx=\"" << num(f.px(r.phi[i][feat])) << "\" cy=\"" << num(f.py(y)) << "\" r=\"2\" fill=\"rgb(" << red
        << ",60," << blue << ")\" fill-opacity=\"0.7\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace lmsrisk::svg
