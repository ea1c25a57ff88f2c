#include "mmdyn/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mmdyn/error.hpp"

namespace mmdyn::svg {
namespace {

constexpr std::string_view kPalette[] = {"#000000", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

std::string header(int width, int height) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
      width, height);
}

}  // namespace

double ChartFrame::x(std::size_t layer) const noexcept {
  if (points <= 1) return 0.5 * (left + right);
  return left + (right - left) * static_cast<double>(layer) / static_cast<double>(points - 1);
}

double ChartFrame::y(double value) const noexcept {
  return bottom - (bottom - top) * (value - y_min) / (y_max - y_min);
}

ChartFrame chart_frame(std::span<const Series> series) {
  ChartFrame f;
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& s : series) {
    f.points = std::max(f.points, s.values.size());
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  f.y_min = lo - pad;
  f.y_max = hi + pad;
  return f;
}

std::string line_chart(std::span<const Series> series, std::string_view metric, std::string_view title,
                       std::span<const std::size_t> markers) {
  if (series.empty() || std::any_of(series.begin(), series.end(), [](const Series& s) { return s.values.empty(); })) {
    throw Error(ErrorCode::EmptySeries, "line chart needs at least one non-empty series");
  }
  const ChartFrame f = chart_frame(series);
  std::string out = header(kChartWidth, kChartHeight);
  if (!title.empty()) {
    out += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                       kChartWidth / 2, escape(title));
  }

  // Axes and ticks.
  out += fmt::format("<g stroke=\"#000000\" stroke-width=\"1\" fill=\"none\">\n"
                     "<line x1=\"{0:.2f}\" y1=\"{2:.2f}\" x2=\"{1:.2f}\" y2=\"{2:.2f}\"/>\n"
                     "<line x1=\"{0:.2f}\" y1=\"{3:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\"/>\n</g>\n",
                     f.left, f.right, f.bottom, f.top);
  const std::size_t step = std::max<std::size_t>(1, (f.points + 9) / 10);
  for (std::size_t l = 0; l < f.points; l += step) {
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", f.x(l), f.bottom + 16, l);
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = f.y_min + (f.y_max - f.y_min) * t / 4.0;
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.3f}</text>\n", f.left - 6, f.y(v) + 4, v);
  }
  out += fmt::format("<text class=\"x-label\" x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">layer</text>\n",
                     0.5 * (f.left + f.right), kChartHeight - 20);
  out += fmt::format(
      "<text class=\"y-label\" x=\"18\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0:.2f})\">{1}</text>\n",
      0.5 * (f.top + f.bottom), escape(metric));

  for (std::size_t m : markers) {
    out += fmt::format(
        "<line class=\"marker\" x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#999999\" "
        "stroke-dasharray=\"4 3\"/>\n",
        f.x(m), f.top, f.bottom);
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto color = kPalette[s % std::size(kPalette)];
    out += fmt::format("<polyline data-series=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"",
                       escape(series[s].name), color);
    for (std::size_t l = 0; l < series[s].values.size(); ++l) {
      out += fmt::format("{}{:.2f},{:.2f}", l ? " " : "", f.x(l), f.y(series[s].values[l]));
    }
    out += "\"/>\n";
    const double ly = f.top + 16.0 * static_cast<double>(s);
    out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       f.right - 150, ly, f.right - 130, color);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", f.right - 125, ly + 4, escape(series[s].name));
  }
  out += "</svg>\n";
  return out;
}

int gray_level(double value, double lo, double hi) noexcept {
  const double t = hi > lo ? (value - lo) / (hi - lo) : 0.0;
  return static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(t, 0.0, 1.0))));
}

std::string heatmap(const std::vector<std::vector<double>>& matrix, std::span<const std::size_t> row_ids,
                    std::string_view row_axis, std::string_view col_axis, std::string_view title) {
  if (matrix.empty() || matrix.front().empty()) throw Error(ErrorCode::EmptySeries, "heatmap needs a non-empty matrix");
  const std::size_t rows = matrix.size();
  const std::size_t cols = matrix.front().size();
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& r : matrix) {
    if (r.size() != cols) throw Error(ErrorCode::ShapeMismatch, "heatmap rows differ in length");
    for (double v : r) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  const int left = 60;
  const int top = title.empty() ? 20 : 40;
  const int width = left + static_cast<int>(cols) * kHeatmapCell + 20;
  const int height = top + static_cast<int>(rows) * kHeatmapCell + 50;
  std::string out = header(width, height);
  if (!title.empty()) {
    out += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", width / 2,
                       escape(title));
  }
  out += "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const int g = gray_level(matrix[r][c], lo, hi);
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},{})\"/>\n",
                         left + static_cast<int>(c) * kHeatmapCell, top + static_cast<int>(r) * kHeatmapCell,
                         kHeatmapCell, kHeatmapCell, g, g, g);
    }
  }
  out += "</g>\n";
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t id = r < row_ids.size() ? row_ids[r] : r;
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{}</text>\n", left - 4,
                       top + static_cast<int>(r) * kHeatmapCell + kHeatmapCell - 3, id);
  }
  const std::size_t step = std::max<std::size_t>(1, (cols + 19) / 20);
  for (std::size_t c = 0; c < cols; c += step) {
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
                       left + static_cast<int>(c) * kHeatmapCell + kHeatmapCell / 2,
                       top + static_cast<int>(rows) * kHeatmapCell + 14, c);
  }
  out += fmt::format("<text class=\"x-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                     left + static_cast<int>(cols) * kHeatmapCell / 2, height - 12, escape(col_axis));
  out += fmt::format(
      "<text class=\"y-label\" x=\"14\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {0})\">{1}</text>\n",
      top + static_cast<int>(rows) * kHeatmapCell / 2, escape(row_axis));
  out += "</svg>\n";
  return out;
}

}  // namespace mmdyn::svg
