#pragma once

#include <span>

#include "vistr/facet.hpp"
#include "vistr/image.hpp"

namespace vistr {

/// Raster geometry shared by charts, sketches and trace extraction. The plot
/// area is the image minus `margin` pixels on every side.
struct RenderConfig {
  int width = 224;
  int height = 224;
  int margin = 4;

  int plot_left() const { return margin; }
  int plot_right() const { return width - margin; }  // exclusive
  int plot_top() const { return margin; }
  int plot_bottom() const { return height - margin; }  // exclusive
  int plot_width() const { return width - 2 * margin; }
  int plot_height() const { return height - 2 * margin; }

  void validate() const;  // throws ConfigError
};

inline constexpr Rgb kLineColor{31, 119, 180};
inline constexpr Rgb kFillColor{174, 199, 232};
inline constexpr Rgb kSketchInk{0, 0, 0};

/// Axis-free chart of a series. Values are min-max scaled with 5% padding
/// (a constant series sits at mid-height) and rasterized with integer
/// fixed-point coordinates only, so output is byte-identical everywhere.
///
/// line: 2 px stroke through uniformly spaced points.
/// area: the line plus a fill down to the plot bottom.
/// bar:  one bar per point, floor(plot_width / n) - 1 px wide, rising from
///       the plot bottom (the padded facet minimum).
///
/// Throws RenderError when the series is too short (2 points for line and
/// area, 1 for bar) or contains non-finite values.
ChartImage render_chart(std::span<const double> values, ChartType type, const RenderConfig& cfg = {});
ChartImage render_chart(const Facet& facet, ChartType type, const RenderConfig& cfg = {});

/// Crops a user drawing to its ink bounding box, scales it uniformly to fit
/// the plot area, re-strokes it at 2 px through the per-column stroke
/// centroids and centers it on a white canvas. Ink is any pixel with
/// luminance below 224. Throws EmptySketchError on a blank canvas.
ChartImage normalize_sketch(const ChartImage& raw, const RenderConfig& cfg = {});

}  // namespace vistr
