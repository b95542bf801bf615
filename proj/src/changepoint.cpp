#include "vistr/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double sample_sd(std::span<const double> series) {
  if (series.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(series.size());
  double ss = 0.0;
  for (double x : series) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(series.size() - 1));
}

}  // namespace

double robust_noise_scale(std::span<const double> series) {
  if (series.size() < 3) return 0.0;
  std::vector<double> diffs(series.size() - 1);
  for (std::size_t i = 1; i < series.size(); ++i) diffs[i - 1] = series[i] - series[i - 1];
  const double center = median(diffs);
  for (double& d : diffs) d = std::abs(d - center);
  return 1.4826 * median(std::move(diffs)) / std::sqrt(2.0);
}

PhtConfig PhtConfig::defaults_for(std::span<const double> series) {
  const double noise = robust_noise_scale(series);
  if (noise > 0.0) return {0.5 * noise, 10.0 * noise, true};
  const double sd = sample_sd(series);
  if (sd > 0.0) return {0.01 * sd, 5.0 * sd, true};
  return {0.0, 1.0, true};
}

void PhtConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError(fmt::format("PHT delta must be >= 0, got {}", delta));
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError(fmt::format("PHT lambda must be > 0, got {}", lambda));
  if (!(lambda > delta)) throw ConfigError(fmt::format("PHT lambda ({}) must exceed delta ({})", lambda, delta));
}

std::vector<std::size_t> pht_changepoints(std::span<const double> series, const PhtConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> alarms;
  double mean = 0.0;
  std::size_t count = 0;
  double up = 0.0, up_min = std::numeric_limits<double>::infinity();
  double down = 0.0, down_min = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < series.size(); ++t) {
    const double x = series[t];
    ++count;
    mean += (x - mean) / static_cast<double>(count);
    up += x - mean - cfg.delta;
    up_min = std::min(up_min, up);
    bool alarm = up - up_min > cfg.lambda;
    if (cfg.two_sided) {
      down += mean - x - cfg.delta;
      down_min = std::min(down_min, down);
      alarm = alarm || down - down_min > cfg.lambda;
    }
    if (alarm) {
      alarms.push_back(t);
      mean = 0.0;
      count = 0;
      up = down = 0.0;
      up_min = down_min = std::numeric_limits<double>::infinity();
    }
  }
  return alarms;
}

}  // namespace vistr
