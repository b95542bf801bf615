#include "vistr/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {
namespace {

// Coordinates are fixed point with 8 fractional bits; pixel (x, y) covers
// [x, x + 1) x [y, y + 1) and its center is at (x + 0.5, y + 0.5).
using Fixed = std::int64_t;
constexpr Fixed kUnit = 256;
constexpr Fixed kHalf = 128;

Fixed floor_div(Fixed a, Fixed b) {
  Fixed q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

Fixed ceil_div(Fixed a, Fixed b) { return -floor_div(-a, b); }

Fixed round_div(Fixed num, Fixed den) { return floor_div(2 * num + den, 2 * den); }

/// One vertical run of ink per column, centered on `mid` so that the
/// column's ink centroid recovers `mid` up to row quantization.
struct ColumnStroke {
  int column;
  Fixed mid;
  Fixed half_extent;
};

// Widens each half extent to at least 1 px and to half the step to the
// neighbouring columns, which keeps the stroke connected.
void connect_strokes(std::vector<ColumnStroke>& strokes) {
  std::vector<Fixed> widened(strokes.size());
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    Fixed h = std::max(kUnit, strokes[i].half_extent);
    if (i > 0 && strokes[i - 1].column + 1 == strokes[i].column) {
      h = std::max(h, ceil_div(std::abs(strokes[i].mid - strokes[i - 1].mid), 2));
    }
    if (i + 1 < strokes.size() && strokes[i + 1].column == strokes[i].column + 1) {
      h = std::max(h, ceil_div(std::abs(strokes[i + 1].mid - strokes[i].mid), 2));
    }
    widened[i] = h;
  }
  for (std::size_t i = 0; i < strokes.size(); ++i) strokes[i].half_extent = widened[i];
}

// Rows whose centers lie in [lo, hi).
std::pair<int, int> row_range(Fixed lo, Fixed hi) {
  return {static_cast<int>(ceil_div(lo - kHalf, kUnit)), static_cast<int>(ceil_div(hi - kHalf, kUnit))};
}

void fill_rows(ChartImage& img, int column, Fixed lo, Fixed hi, Rgb color) {
  auto [r0, r1] = row_range(lo, hi);
  r0 = std::max(r0, 0);
  r1 = std::min(r1, img.height());
  for (int r = r0; r < r1; ++r) img.set(column, r, color);
}

void draw_strokes(ChartImage& img, const std::vector<ColumnStroke>& strokes, Rgb color) {
  for (const auto& s : strokes) fill_rows(img, s.column, s.mid - s.half_extent, s.mid + s.half_extent, color);
}

struct Scaled {
  std::vector<Fixed> y;  // per point, fixed point row coordinate
};

Scaled scale_values(std::span<const double> values, const RenderConfig& cfg) {
  double lo = values[0], hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw RenderError("series contains non-finite values");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  const Fixed bottom = static_cast<Fixed>(cfg.plot_bottom()) * kUnit;
  const double span = static_cast<double>(cfg.plot_height()) * kUnit;
  Scaled out;
  out.y.reserve(values.size());
  for (double v : values) {
    const double t = range > 0.0 ? ((v - lo) / range + 0.05) / 1.1 : 0.5;
    out.y.push_back(bottom - static_cast<Fixed>(std::llround(t * span)));
  }
  return out;
}

// Per-column midrange of a polyline through (x[i], y[i]) with x strictly
// increasing and spanning the plot width.
std::vector<ColumnStroke> polyline_columns(const std::vector<Fixed>& x, const std::vector<Fixed>& y,
                                           const RenderConfig& cfg) {
  std::vector<ColumnStroke> strokes;
  strokes.reserve(static_cast<std::size_t>(cfg.plot_width()));
  std::size_t seg = 0;
  auto y_at = [&](Fixed px) {
    while (seg + 2 < x.size() && x[seg + 1] <= px) ++seg;
    const Fixed x0 = x[seg], x1 = x[seg + 1];
    if (px <= x0) return y[seg];
    if (px >= x1) return y[seg + 1];
    return y[seg] + round_div((y[seg + 1] - y[seg]) * (px - x0), x1 - x0);
  };
  std::size_t vertex = 0;
  for (int c = cfg.plot_left(); c < cfg.plot_right(); ++c) {
    const Fixed left = static_cast<Fixed>(c) * kUnit;
    const Fixed right = left + kUnit;
    Fixed lo = y_at(left);
    Fixed hi = lo;
    while (vertex < x.size() && x[vertex] <= left) ++vertex;
    for (std::size_t v = vertex; v < x.size() && x[v] < right; ++v) {
      lo = std::min(lo, y[v]);
      hi = std::max(hi, y[v]);
    }
    const Fixed yr = y_at(right);
    lo = std::min(lo, yr);
    hi = std::max(hi, yr);
    strokes.push_back({c, floor_div(lo + hi, 2), ceil_div(hi - lo, 2)});
  }
  return strokes;
}

}  // namespace

void RenderConfig::validate() const {
  if (width <= 0 || height <= 0 || margin < 0 || plot_width() < 2 || plot_height() < 2) {
    throw ConfigError(fmt::format("invalid render geometry {}x{} margin {}", width, height, margin));
  }
}

ChartImage render_chart(std::span<const double> values, ChartType type, const RenderConfig& cfg) {
  cfg.validate();
  const std::size_t n = values.size();
  if (type == ChartType::kSketch) throw RenderError("sketch is not a chart type");
  if (type == ChartType::kBar ? n < 1 : n < 2) {
    throw RenderError(fmt::format("{} chart needs at least {} points, got {}", to_string(type),
                                  type == ChartType::kBar ? 1 : 2, n));
  }
  ChartImage img(cfg.width, cfg.height, type);
  const Scaled scaled = scale_values(values, cfg);
  const Fixed bottom = static_cast<Fixed>(cfg.plot_bottom()) * kUnit;
  const auto pw = static_cast<Fixed>(cfg.plot_width());

  if (type == ChartType::kBar) {
    const Fixed bar_width = std::max<Fixed>(1, pw / static_cast<Fixed>(n) - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const Fixed start = cfg.plot_left() + static_cast<Fixed>(i) * pw / static_cast<Fixed>(n);
      // The top row is always inked so even the minimum bar is visible.
      const Fixed top = std::min(scaled.y[i], bottom - kHalf);
      for (Fixed c = start; c < start + bar_width && c < cfg.plot_right(); ++c) {
        fill_rows(img, static_cast<int>(c), top, bottom, kLineColor);
      }
    }
    return img;
  }

  std::vector<Fixed> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = cfg.plot_left() * kUnit + static_cast<Fixed>(i) * pw * kUnit / static_cast<Fixed>(n - 1);
  }
  auto strokes = polyline_columns(x, scaled.y, cfg);
  if (type == ChartType::kArea) {
    for (const auto& s : strokes) {
      fill_rows(img, s.column, s.mid, bottom, kFillColor);
      fill_rows(img, s.column, s.mid - kUnit, s.mid + kUnit, kLineColor);
    }
    return img;
  }
  connect_strokes(strokes);
  draw_strokes(img, strokes, kLineColor);
  return img;
}

ChartImage render_chart(const Facet& facet, ChartType type, const RenderConfig& cfg) {
  return render_chart(facet.values, type, cfg);
}

ChartImage normalize_sketch(const ChartImage& raw, const RenderConfig& cfg) {
  cfg.validate();
  const int w = raw.width(), h = raw.height();
  std::vector<char> ink(static_cast<std::size_t>(w) * h, 0);
  int x0 = w, y0 = h, x1 = -1, y1 = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb c = raw.at(x, y);
      const int lum = (299 * c.r + 587 * c.g + 114 * c.b) / 1000;
      if (lum < 224) {
        ink[static_cast<std::size_t>(y) * w + x] = 1;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) throw EmptySketchError("sketch contains no strokes");

  const Fixed bw = x1 - x0 + 1, bh = y1 - y0 + 1;
  const Fixed pw = cfg.plot_width(), ph = cfg.plot_height();
  Fixed tw, th;
  if (bw * ph >= bh * pw) {
    tw = pw;
    th = std::max<Fixed>(1, round_div(bh * pw, bw));
  } else {
    th = ph;
    tw = std::max<Fixed>(1, round_div(bw * ph, bh));
  }

  // Any-ink pooling when shrinking, nearest sampling when enlarging.
  auto src_range = [](Fixed u, Fixed src, Fixed dst) {
    const Fixed a = u * src / dst;
    const Fixed b = std::max((u + 1) * src / dst, a + 1);
    return std::pair<Fixed, Fixed>{a, b};
  };
  std::vector<std::optional<Fixed>> centroid(static_cast<std::size_t>(tw));
  for (Fixed u = 0; u < tw; ++u) {
    const auto [sx0, sx1] = src_range(u, bw, tw);
    Fixed sum = 0, count = 0;
    for (Fixed v = 0; v < th; ++v) {
      const auto [sy0, sy1] = src_range(v, bh, th);
      bool any = false;
      for (Fixed sy = sy0; sy < sy1 && !any; ++sy) {
        for (Fixed sx = sx0; sx < sx1; ++sx) {
          if (ink[static_cast<std::size_t>(y0 + sy) * w + static_cast<std::size_t>(x0 + sx)]) {
            any = true;
            break;
          }
        }
      }
      if (any) {
        sum += v * kUnit + kHalf;
        ++count;
      }
    }
    if (count > 0) centroid[static_cast<std::size_t>(u)] = round_div(sum, count);
  }

  // Columns the pooling left empty are bridged linearly.
  std::vector<ColumnStroke> strokes;
  strokes.reserve(static_cast<std::size_t>(tw));
  std::optional<Fixed> prev_u;
  for (Fixed u = 0; u < tw; ++u) {
    if (!centroid[static_cast<std::size_t>(u)]) continue;
    const Fixed mid = *centroid[static_cast<std::size_t>(u)];
    if (prev_u && u - *prev_u > 1) {
      const Fixed pm = *centroid[static_cast<std::size_t>(*prev_u)];
      for (Fixed g = *prev_u + 1; g < u; ++g) {
        strokes.push_back({static_cast<int>(g), pm + round_div((mid - pm) * (g - *prev_u), u - *prev_u), 0});
      }
    }
    strokes.push_back({static_cast<int>(u), mid, 0});
    prev_u = u;
  }
  connect_strokes(strokes);

  Fixed top = strokes.front().mid - strokes.front().half_extent;
  Fixed bot = strokes.front().mid + strokes.front().half_extent;
  for (const auto& s : strokes) {
    top = std::min(top, s.mid - s.half_extent);
    bot = std::max(bot, s.mid + s.half_extent);
  }
  const auto [r_top, r_end] = row_range(top, bot);
  const Fixed offset_x = (cfg.width - tw) / 2;
  const Fixed offset_y = (cfg.height - (r_end - r_top)) / 2 - r_top;
  for (auto& s : strokes) {
    s.column += static_cast<int>(offset_x);
    s.mid += offset_y * kUnit;
  }
  ChartImage out(cfg.width, cfg.height, ChartType::kSketch);
  draw_strokes(out, strokes, kSketchInk);
  return out;
}

}  // namespace vistr
