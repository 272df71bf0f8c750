#include "evtes/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace evtes {

namespace {

constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1-2-5 tick step giving roughly five ticks.
double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string svg_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (spec.bars) y0 = std::min(y0, 0.0);
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y1 += pad;
  if (!spec.bars) y0 -= pad;

  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << fmt::format(R"svg(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)svg",
                    kW, kH)
     << '\n';
  os << fmt::format(R"svg(<rect x="0" y="0" width="{}" height="{}" fill="white"/>)svg", kW, kH) << '\n';
  os << fmt::format(R"svg(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)svg", kW / 2, escape(spec.title))
     << '\n';
  os << fmt::format(R"svg(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)svg", kLeft, kTop, pw, ph)
     << '\n';

  const double xs = nice_step(x1 - x0), ys = nice_step(y1 - y0);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs)
    os << fmt::format(R"svg(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="black"/>)svg", px(t), kTop + ph,
                      kTop + ph + 5)
       << fmt::format(R"svg(<text x="{:.2f}" y="{:.2f}" text-anchor="middle">{:g}</text>)svg", px(t), kTop + ph + 18,
                      std::abs(t) < 1e-12 * xs ? 0.0 : t)
       << '\n';
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys)
    os << fmt::format(R"svg(<line x1="{0:.2f}" y1="{1:.2f}" x2="{2:.2f}" y2="{1:.2f}" stroke="black"/>)svg", kLeft - 5, py(t),
                      kLeft)
       << fmt::format(R"svg(<text x="{:.2f}" y="{:.2f}" text-anchor="end">{:g}</text>)svg", kLeft - 8, py(t) + 4,
                      std::abs(t) < 1e-12 * ys ? 0.0 : t)
       << '\n';
  os << fmt::format(R"svg(<text x="{}" y="{}" text-anchor="middle">{}</text>)svg", kLeft + pw / 2, kH - 12,
                    escape(spec.x_label))
     << '\n';
  os << fmt::format(R"svg(<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>)svg",
                    kTop + ph / 2, escape(spec.y_label))
     << '\n';

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (spec.bars && k == 0) {
        const double right = i + 1 < n ? s.x[i + 1] : s.x[i] + (i > 0 ? s.x[i] - s.x[i - 1] : 1.0);
        pts += fmt::format("{:.2f},{:.2f} {:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]), px(right), py(s.y[i]));
      } else {
        pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      }
    }
    if (!pts.empty()) pts.pop_back();
    os << fmt::format(R"svg(<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>)svg", color, pts) << '\n';
    if (!s.label.empty())
      os << fmt::format(R"svg(<text x="{:.2f}" y="{:.2f}" fill="{}">{}</text>)svg", kLeft + pw - 110, kTop + 18 + 16 * k,
                        color, escape(s.label))
         << '\n';
  }
  os << "</svg>\n";
  return os.str();
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  out += '\n';
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace evtes
