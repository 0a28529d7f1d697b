#include "dpost/eval/plots.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dpost::eval {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

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

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Frame {
  double x0, x1, y0, y1;
  bool log_x;

  double tx(double x) const {
    double a = log_x ? std::log10(x) : x, lo = log_x ? std::log10(x0) : x0, hi = log_x ? std::log10(x1) : x1;
    return kLeft + (a - lo) / (hi - lo) * (kWidth - kLeft - kRight);
  }
  double ty(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Frame frame_for(const std::vector<Series>& series, bool log_x) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (log_x && x <= 0) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = log_x ? 1 : 0, x1 = log_x ? 10 : 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= log_x ? x0 / 2 : 0.5, x1 += log_x ? x1 : 0.5;
  y0 = std::min(y0, 0.0);
  if (y1 == y0) y1 = y0 + 1;
  y1 += 0.05 * (y1 - y0);
  return {x0, x1, y0, y1, log_x};
}

void axes(std::ostringstream& os, const ChartSpec& spec, const Frame& f) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
     << "</text>\n";
  double xa = kLeft, xb = kWidth - kRight, ya = kTop, yb = kHeight - kBottom;
  os << "<line x1=\"" << xa << "\" y1=\"" << yb << "\" x2=\"" << xb << "\" y2=\"" << yb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << xa << "\" y1=\"" << ya << "\" x2=\"" << xa << "\" y2=\"" << yb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double y = f.y0 + (f.y1 - f.y0) * i / 4;
    os << "<text x=\"" << xa - 6 << "\" y=\"" << f.ty(y) + 4 << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
  }
  os << "<text x=\"" << (xa + xb) / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
     << escape(spec.x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << (ya + yb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << (ya + yb) / 2 << ")\">" << escape(spec.y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& names) {
  for (size_t i = 0; i < names.size(); ++i) {
    double y = kTop + 10 + 18.0 * static_cast<double>(i);
    os << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
       << kPalette[i % 6] << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight + 30 << "\" y=\"" << y + 1 << "\">" << escape(names[i]) << "</text>\n";
  }
}

void x_ticks(std::ostringstream& os, const std::vector<Series>& series, const Frame& f) {
  std::vector<double> xs;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  if (xs.size() > 8) {
    std::vector<double> thin;
    for (int i = 0; i <= 4; ++i) thin.push_back(f.x0 + (f.x1 - f.x0) * i / 4);
    xs = thin;
  }
  for (double x : xs) {
    if (f.log_x && x <= 0) continue;
    os << "<text x=\"" << f.tx(x) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << fmt(x)
       << "</text>\n";
  }
}

std::vector<std::string> names_of(const std::vector<Series>& series) {
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  return names;
}

}  // namespace

std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series) {
  Frame f = frame_for(series, spec.log_x);
  std::ostringstream os;
  axes(os, spec, f);
  x_ticks(os, series, f);
  for (size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : series[i].points) os << f.tx(x) << "," << f.ty(y) << " ";
    os << "\"/>\n";
    for (auto [x, y] : series[i].points) {
      os << "<circle cx=\"" << f.tx(x) << "\" cy=\"" << f.ty(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
  }
  legend(os, names_of(series));
  os << "</svg>\n";
  return os.str();
}

std::string scatter_svg(const ChartSpec& spec, const std::vector<Series>& series) {
  Frame f = frame_for(series, spec.log_x);
  std::ostringstream os;
  axes(os, spec, f);
  x_ticks(os, series, f);
  for (size_t i = 0; i < series.size(); ++i) {
    for (auto [x, y] : series[i].points) {
      if (spec.log_x && x <= 0) continue;
      os << "<circle cx=\"" << f.tx(x) << "\" cy=\"" << f.ty(y) << "\" r=\"5\" fill=\"" << kPalette[i % 6]
         << "\" fill-opacity=\"0.8\"/>\n";
    }
  }
  legend(os, names_of(series));
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart_svg(const ChartSpec& spec, const std::vector<std::string>& series_names,
                          const std::vector<BarGroup>& groups) {
  double top = 0.0;
  for (const auto& g : groups) {
    for (double v : g.values) top = std::max(top, v);
  }
  Frame f{0, 1, 0, top > 0 ? top * 1.05 : 1.0, false};
  std::ostringstream os;
  axes(os, spec, f);
  double span = kWidth - kLeft - kRight;
  double group_w = groups.empty() ? span : span / static_cast<double>(groups.size());
  double bar_w = group_w * 0.8 / std::max<size_t>(1, series_names.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    double gx = kLeft + group_w * static_cast<double>(g) + group_w * 0.1;
    for (size_t s = 0; s < groups[g].values.size(); ++s) {
      double v = groups[g].values[s];
      double x = gx + bar_w * static_cast<double>(s);
      os << "<rect x=\"" << x << "\" y=\"" << f.ty(v) << "\" width=\"" << bar_w * 0.9 << "\" height=\""
         << f.ty(0) - f.ty(v) << "\" fill=\"" << kPalette[s % 6] << "\"/>\n";
    }
    os << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
       << escape(groups[g].label) << "</text>\n";
  }
  legend(os, series_names);
  os << "</svg>\n";
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace dpost::eval
