#pragma once

#include <span>
#include <vector>

namespace vistr {

/// Gaussian kernel parameters, both in samples.
struct SmoothingConfig {
  double sigma = 2.0;
  int radius = 6;

  /// sigma with the default half-width ceil(3 * sigma).
  static SmoothingConfig with_sigma(double sigma);
  void validate() const;  // throws ConfigError
};

/// Normalized kernel weights for offsets -radius..radius.
std::vector<double> gaussian_kernel(const SmoothingConfig& cfg);

/// Discrete Gaussian smoothing with truncate-and-renormalize edges. Output
/// has the input's length; constant input is returned bit-identical, and
/// every output lies within the min/max of its input window.
std::vector<double> gaussian_smooth(std::span<const double> series, const SmoothingConfig& cfg);

}  // namespace vistr
