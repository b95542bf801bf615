#include "vistr/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "vistr/errors.hpp"
#include "vistr/rng.hpp"

namespace vistr {
namespace {

constexpr double kSignDeadband = 0.01;
constexpr std::array<double, kStatCount> kStatCenter{0.5, 0.25, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5};

}  // namespace

double Embedding::dot(const Embedding& other) const {
  double s = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) s += values[i] * other.values[i];
  return s;
}

double Embedding::norm() const { return std::sqrt(dot(*this)); }

Embedding Embedding::normalized(std::span<const double> raw) {
  if (raw.size() != kEmbeddingDim) {
    throw ConfigError(fmt::format("embedding needs {} components, got {}", kEmbeddingDim, raw.size()));
  }
  double sq = 0.0;
  for (double v : raw) sq += v * v;
  const double n = std::sqrt(sq);
  if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("cannot normalize a zero or non-finite vector");
  Embedding e;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) e.values[i] = raw[i] / n;
  return e;
}

double similarity(const Embedding& a, const Embedding& b) { return std::clamp(a.dot(b), -1.0, 1.0); }

ColumnProfile extract_profile(const ChartImage& img, const RenderConfig& cfg) {
  const int w = img.width(), h = img.height();
  const double base = cfg.plot_bottom();
  std::vector<double> centroid(static_cast<std::size_t>(w), 0.0);
  std::vector<char> inked(static_cast<std::size_t>(w), 0);
  int first = -1, last = -1;
  for (int x = 0; x < w; ++x) {
    long sum = 0, count = 0;
    for (int y = 0; y < h; ++y) {
      if (img.is_ink(x, y)) {
        sum += 2 * y + 1;
        ++count;
      }
    }
    if (count == 0) continue;
    centroid[static_cast<std::size_t>(x)] = base - static_cast<double>(sum) / (2.0 * static_cast<double>(count));
    inked[static_cast<std::size_t>(x)] = 1;
    if (first < 0) first = x;
    last = x;
  }
  if (first < 0) throw EmptySketchError("image contains no ink");

  ColumnProfile out;
  out.first_column = first;
  out.heights.reserve(static_cast<std::size_t>(last - first + 1));
  int prev = first;
  for (int x = first; x <= last; ++x) {
    if (!inked[static_cast<std::size_t>(x)]) continue;
    if (x - prev > 1) {
      const double a = centroid[static_cast<std::size_t>(prev)], b = centroid[static_cast<std::size_t>(x)];
      for (int g = prev + 1; g < x; ++g) out.heights.push_back(a + (b - a) * (g - prev) / (x - prev));
    }
    out.heights.push_back(centroid[static_cast<std::size_t>(x)]);
    prev = x;
  }
  return out;
}

namespace {

std::vector<double> resample(const std::vector<double>& src, std::size_t n) {
  std::vector<double> out(n);
  if (src.size() == 1) {
    std::fill(out.begin(), out.end(), src[0]);
    return out;
  }
  const double step = static_cast<double>(src.size() - 1) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = static_cast<double>(k) * step;
    const auto i = std::min(static_cast<std::size_t>(pos), src.size() - 2);
    const double f = pos - static_cast<double>(i);
    out[k] = src[i] + (src[i + 1] - src[i]) * f;
  }
  return out;
}

void min_max_normalize(std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, range = *hi - *lo;
  for (double& x : v) x = range > 0.0 ? (x - a) / range : 0.5;
}

double range_ratio(const std::vector<double>& heights) {
  const auto [lo, hi] = std::minmax_element(heights.begin(), heights.end());
  if (!(*hi > 0.0)) return 0.0;
  return std::clamp((*hi - *lo) / *hi, 0.0, 1.0);
}

}  // namespace

std::vector<double> extract_trace(const ChartImage& img, const RenderConfig& cfg) {
  auto trace = resample(extract_profile(img, cfg).heights, kTracePoints);
  min_max_normalize(trace);
  return trace;
}

std::array<double, kDescriptorDim> ShapeDescriptor::flatten() const {
  std::array<double, kDescriptorDim> out{};
  auto it = std::copy(trace.begin(), trace.end(), out.begin());
  it = std::copy(diffs.begin(), diffs.end(), it);
  std::copy(stats.begin(), stats.end(), it);
  return out;
}

ShapeDescriptor describe_trace(std::span<const double> trace, double ratio) {
  if (trace.size() != kTracePoints) {
    throw ConfigError(fmt::format("trace needs {} points, got {}", kTracePoints, trace.size()));
  }
  ShapeDescriptor d;
  std::copy(trace.begin(), trace.end(), d.trace.begin());
  for (std::size_t i = 0; i + 1 < kTracePoints; ++i) d.diffs[i] = trace[i + 1] - trace[i];

  const double n = static_cast<double>(kTracePoints);
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
  double var = 0.0;
  for (double v : trace) var += (v - mean) * (v - mean);
  // Lowest index wins on ties.
  const auto argmax = static_cast<std::size_t>(std::max_element(trace.begin(), trace.end()) - trace.begin());
  const auto argmin = static_cast<std::size_t>(std::min_element(trace.begin(), trace.end()) - trace.begin());
  int last_sign = 0, changes = 0;
  for (double diff : d.diffs) {
    if (std::abs(diff) <= kSignDeadband) continue;
    const int s = diff > 0 ? 1 : -1;
    if (last_sign != 0 && s != last_sign) ++changes;
    last_sign = s;
  }
  d.stats = {mean,
             std::sqrt(var / n),
             static_cast<double>(argmax) / n,
             static_cast<double>(argmin) / n,
             static_cast<double>(changes) / (n - 1),
             trace.front(),
             trace.back(),
             ratio};
  return d;
}

ShapeDescriptor describe_image(const ChartImage& img, const RenderConfig& cfg) {
  const ColumnProfile profile = extract_profile(img, cfg);
  auto trace = resample(profile.heights, kTracePoints);
  min_max_normalize(trace);
  return describe_trace(trace, range_ratio(profile.heights));
}

Eigen::MatrixXd make_projection(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  if (cols > rows) throw ConfigError("projection needs rows >= cols for orthonormal columns");
  Rng rng(seed);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) p(r, c) = rng.normal();
  }
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    for (Eigen::Index k = 0; k < c; ++k) p.col(c) -= p.col(k).dot(p.col(c)) * p.col(k);
    p.col(c) /= p.col(c).norm();
  }
  return p;
}

DescriptorEmbedder::DescriptorEmbedder(RenderConfig render, Weights weights)
    : render_(render), weights_(weights), projection_(make_projection(kSeed)) {
  render_.validate();
}

Embedding DescriptorEmbedder::embed_descriptor(const ShapeDescriptor& d) const {
  Eigen::VectorXd f(static_cast<Eigen::Index>(kDescriptorDim));
  Eigen::Index k = 0;
  for (double v : d.trace) f(k++) = weights_.trace * (v - 0.5);
  for (double v : d.diffs) f(k++) = weights_.diffs * v;
  for (std::size_t i = 0; i < kStatCount; ++i) f(k++) = weights_.stats * (d.stats[i] - kStatCenter[i]);
  const Eigen::VectorXd y = projection_ * f;
  return Embedding::normalized(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

Embedding DescriptorEmbedder::embed_image(const ChartImage& img) const {
  return embed_descriptor(describe_image(img, render_));
}

}  // namespace vistr
