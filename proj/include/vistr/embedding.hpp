#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vistr/image.hpp"
#include "vistr/render.hpp"

namespace vistr {

inline constexpr std::size_t kEmbeddingDim = 512;
inline constexpr std::size_t kTracePoints = 64;
inline constexpr std::size_t kStatCount = 8;
inline constexpr std::size_t kDescriptorDim = kTracePoints + (kTracePoints - 1) + kStatCount;  // 135

/// Unit-norm vector in the joint chart/sketch/text space.
struct Embedding {
  std::array<double, kEmbeddingDim> values{};

  double dot(const Embedding& other) const;
  double norm() const;

  /// Scales `raw` to unit length; throws ConfigError for a zero or
  /// non-finite vector.
  static Embedding normalized(std::span<const double> raw);

  bool operator==(const Embedding&) const = default;
};

/// Dot product of two unit-norm embeddings, in [-1, 1].
double similarity(const Embedding& a, const Embedding& b);

/// Ink-centroid heights (pixels above the plot bottom) for every column
/// between the first and last inked column; ink-free columns in between
/// are linearly interpolated.
struct ColumnProfile {
  int first_column = 0;
  std::vector<double> heights;
};

ColumnProfile extract_profile(const ChartImage& img, const RenderConfig& cfg = {});

/// The profile resampled to 64 points and min-max normalized to [0, 1]
/// (a constant profile maps to 0.5). Throws EmptySketchError on a blank
/// image.
std::vector<double> extract_trace(const ChartImage& img, const RenderConfig& cfg = {});

/// Fixed-length shape summary of a chart or sketch.
///
/// stats = {mean, sd, argmax/64, argmin/64, sign changes/63, first, last,
/// range ratio}; sign changes count direction reversals of the differences
/// larger than 0.01, and the range ratio is (max - min) / max of the raw
/// profile heights, which is 0 for flat drawings and the same for line,
/// bar and area renders of one facet.
struct ShapeDescriptor {
  std::array<double, kTracePoints> trace{};
  std::array<double, kTracePoints - 1> diffs{};
  std::array<double, kStatCount> stats{};

  std::array<double, kDescriptorDim> flatten() const;
};

ShapeDescriptor describe_trace(std::span<const double> trace, double range_ratio);
ShapeDescriptor describe_image(const ChartImage& img, const RenderConfig& cfg = {});

/// Maps images into the joint space. Implementations must be pure and
/// thread-safe so that references can be embedded in parallel.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed_image(const ChartImage& img) const = 0;
  virtual std::string_view name() const = 0;
};

/// Per-block multipliers applied to the centered descriptor. Differences
/// carry most of the shape signal; a lighter diffs block lets absolute
/// level dominate and a heavier one makes near-identical facets too far
/// apart for pruning to remove them.
struct DescriptorWeights {
  double trace = 1.0;
  double diffs = 8.0;
  double stats = 1.0;
};

/// Deterministic shape-descriptor embedder (version 1).
///
/// The descriptor blocks are centered and weighted (trace - 0.5, diffs,
/// stats - {0.5, 0.25, 0.5, 0.5, 0, 0.5, 0.5, 0.5}), multiplied by a fixed
/// 512 x 135 matrix with orthonormal columns and L2-normalized. The matrix
/// is generated from Rng(42): standard normal entries filled column by
/// column, then orthonormalized with modified Gram-Schmidt in column order.
/// Because the columns are orthonormal, dot products between embeddings
/// equal cosine similarities of the weighted descriptors.
class DescriptorEmbedder final : public Embedder {
 public:
  static constexpr int kVersion = 1;
  static constexpr std::uint64_t kSeed = 42;

  using Weights = DescriptorWeights;

  explicit DescriptorEmbedder(RenderConfig render = {}, Weights weights = {});

  Embedding embed_image(const ChartImage& img) const override;
  Embedding embed_descriptor(const ShapeDescriptor& d) const;
  std::string_view name() const override { return "shape-descriptor-v1"; }

  const Eigen::MatrixXd& projection() const { return projection_; }
  const Weights& weights() const { return weights_; }

 private:
  RenderConfig render_;
  Weights weights_;
  Eigen::MatrixXd projection_;
};

/// The matrix described above, exposed for tests.
Eigen::MatrixXd make_projection(std::uint64_t seed, std::size_t rows = kEmbeddingDim, std::size_t cols = kDescriptorDim);

}  // namespace vistr
