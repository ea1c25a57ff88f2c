#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmdyn::svg {

inline constexpr int kChartWidth = 800;
inline constexpr int kChartHeight = 500;
inline constexpr int kHeatmapCell = 14;

struct Series {
  std::string name;
  std::vector<double> values;  // y per layer, x = index
};

struct Point {
  double x;
  double y;
};

/// Maps layer index / value to canvas coordinates of a line chart.
struct ChartFrame {
  double left = 70, right = 780, top = 40, bottom = 440;
  double y_min = 0.0, y_max = 1.0;
  std::size_t points = 1;

  double x(std::size_t layer) const noexcept;
  double y(double value) const noexcept;
};

ChartFrame chart_frame(std::span<const Series> series);

/// Standalone 800x500 line chart, x axis "layer", y axis `metric`. Optional
/// dashed vertical markers (e.g. phase boundaries). Throws EmptySeries.
std::string line_chart(std::span<const Series> series, std::string_view metric, std::string_view title = {},
                       std::span<const std::size_t> markers = {});

/// Grayscale heatmap, one cell per entry, linear min-max mapping with the
/// maximum drawn black. `row_ids` label the rows. Throws EmptySeries.
std::string heatmap(const std::vector<std::vector<double>>& matrix, std::span<const std::size_t> row_ids,
                    std::string_view row_axis, std::string_view col_axis, std::string_view title = {});

/// Gray level 0..255 of `value` under min-max mapping (max -> 0, black).
int gray_level(double value, double lo, double hi) noexcept;

}  // namespace mmdyn::svg
