#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <string>
#include <vector>

#include "vistr/image.hpp"
#include "vistr/rng.hpp"

namespace vistr::testing {

/// Rasterizes `values` as a 3 px black polyline on a white canvas, the way
/// a user would draw it. Uses plain integer stepping so the helper shares
/// no code with the renderer under test.
inline ChartImage draw_sketch(const std::vector<double>& values, int width = 448, int height = 300) {
  ChartImage img(width, height, ChartType::kSketch);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, range = std::max(*hi_it - *lo_it, 1e-12);
  const int pad = 20;
  auto px = [&](std::size_t i) { return pad + static_cast<int>(std::lround(double(i) * (width - 2 * pad - 1) / double(values.size() - 1))); };
  auto py = [&](std::size_t i) { return height - pad - 1 - static_cast<int>(std::lround((values[i] - lo) / range * (height - 2 * pad - 1))); };
  auto dab = [&](int x, int y) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (x + dx >= 0 && x + dx < width && y + dy >= 0 && y + dy < height) img.set(x + dx, y + dy, Rgb{0, 0, 0});
  };
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const int x0 = px(i), y0 = py(i), x1 = px(i + 1), y1 = py(i + 1);
    const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
    for (int s = 0; s <= steps; ++s)
      dab(x0 + (x1 - x0) * s / steps, y0 + (y1 - y0) * s / steps);
  }
  return img;
}

/// Uniformly random unit vector of dimension `dim`.
inline std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vistr-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vistr::testing
