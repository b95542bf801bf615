#include "vistr/smoothing.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {

SmoothingConfig SmoothingConfig::with_sigma(double sigma) {
  return {sigma, std::max(1, static_cast<int>(std::ceil(3.0 * sigma)))};
}

void SmoothingConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError(fmt::format("smoothing sigma must be > 0, got {}", sigma));
  if (radius < 1) throw ConfigError(fmt::format("smoothing radius must be >= 1, got {}", radius));
}

std::vector<double> gaussian_kernel(const SmoothingConfig& cfg) {
  cfg.validate();
  std::vector<double> w(2 * static_cast<std::size_t>(cfg.radius) + 1);
  double total = 0.0;
  for (int j = -cfg.radius; j <= cfg.radius; ++j) {
    const double v = std::exp(-0.5 * (j * j) / (cfg.sigma * cfg.sigma));
    w[static_cast<std::size_t>(j + cfg.radius)] = v;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> gaussian_smooth(std::span<const double> series, const SmoothingConfig& cfg) {
  const auto kernel = gaussian_kernel(cfg);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  std::vector<double> out(series.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - cfg.radius);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, t + cfg.radius);
    const double center = series[t];
    double weight = 0.0;
    double offset = 0.0;
    double wmin = center;
    double wmax = center;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double w = kernel[static_cast<std::size_t>(i - t + cfg.radius)];
      weight += w;
      offset += w * (series[i] - center);
      wmin = std::min(wmin, series[i]);
      wmax = std::max(wmax, series[i]);
    }
    // Expressed relative to the center sample so constants stay exact; the
    // clamp removes rounding excursions outside the convex hull.
    out[t] = std::clamp(center + offset / weight, wmin, wmax);
  }
  return out;
}

}  // namespace vistr
