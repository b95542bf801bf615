#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vistr {

/// Page-Hinkley test parameters, in the units of the series.
struct PhtConfig {
  double delta = 0.05;   // drift tolerance
  double lambda = 2.5;   // alarm threshold
  bool two_sided = true;

  /// Scale-free defaults: delta = 0.5 * noise and lambda = 10 * noise, where
  /// noise is the MAD-based standard deviation of first differences divided
  /// by sqrt(2). Series without measurable noise (e.g. noiseless steps or
  /// ramps) fall back to delta = 0.01 * sd and lambda = 5 * sd.
  static PhtConfig defaults_for(std::span<const double> series);

  void validate() const;  // throws ConfigError
};

/// Robust noise estimate from first differences (0 if undefined).
double robust_noise_scale(std::span<const double> series);

/// Classic Page-Hinkley detector. With running mean m_t of the samples since
/// the last reset, the cumulative statistic U_t = sum(x_i - m_i - delta) is
/// tracked against its running minimum; an alarm fires at t when
/// U_t - min U > lambda. The two-sided variant also runs the mirrored
/// statistic sum(m_i - x_i - delta). Every alarm resets all statistics and
/// detection resumes at t + 1. Returns strictly increasing alarm indices.
std::vector<std::size_t> pht_changepoints(std::span<const double> series, const PhtConfig& cfg);

}  // namespace vistr
