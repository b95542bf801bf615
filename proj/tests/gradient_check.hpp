#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "support.hpp"
#include "vistr/alignment.hpp"
#include "vistr/rng.hpp"

namespace vistr::testing {

inline Matrix random_rows(Rng& rng, std::size_t rows, std::size_t dim) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto v = random_unit(rng, dim);
    for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }
  return m;
}

/// Matched triples where text and sketch are noisy copies of the chart.
/// At noise 8 the positives keep a cosine near 0.12, so hinges are active
/// and the gradient is not trivially zero.
inline AlignmentBatch random_batch(std::uint64_t seed, std::size_t rows, std::size_t dim, double noise = 8.0) {
  Rng rng(seed);
  AlignmentBatch b;
  b.chart = random_rows(rng, rows, dim);
  b.text = normalize_rows(b.chart + noise * random_rows(rng, rows, dim));
  b.sketch = normalize_rows(b.chart + noise * random_rows(rng, rows, dim));
  return b;
}

inline Matrix random_head(std::uint64_t seed, std::size_t dim, double noise) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  Matrix w = Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) += noise * rng.normal() / std::sqrt(double(dim));
  return w;
}

/// Smallest distance of any hinge from its kink and of any hardest
/// negative from the runner-up, over both pairings. The finite-difference
/// check is only meaningful when this exceeds the step's effect.
inline double kink_clearance(const AlignmentBatch& b, const ProjectionHead& head, const AlignConfig& cfg) {
  double clearance = INFINITY;
  for (const Matrix* other : {&b.text, &b.sketch}) {
    const Matrix h = pair_entropy_matrix(b.chart, head.project(*other), cfg.temperature_tau);
    const Eigen::Index n = h.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> row, col;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) {
          row.push_back(h(i, j));
          col.push_back(h(j, i));
        }
      for (auto* v : {&row, &col}) {
        std::sort(v->begin(), v->end());
        clearance = std::min(clearance, std::abs(cfg.margin_alpha + h(i, i) - v->front()));
        if (v->size() > 1) clearance = std::min(clearance, (*v)[1] - (*v)[0]);
      }
    }
  }
  return clearance;
}

/// A step of 1e-5 on one head entry moves H by well under 1e-4, so batches
/// with at least this clearance keep every hinge sign and argmin fixed.
inline constexpr double kMinClearance = 1e-4;

struct GradientCheck {
  double max_rel_error = 0.0;
  double clearance = 0.0;
  std::size_t entries = 0;
  std::size_t active = 0;  // entries with a non-zero analytic gradient
  std::size_t redraws = 0;  // batches rejected for sitting near a kink
  double loss = 0.0;
};

/// Central differences (step 1e-5) on `samples` random head entries plus
/// the 16 entries with the largest analytic gradient. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6). Batches closer
/// than kMinClearance to a kink or tie are redrawn from a derived seed.
inline GradientCheck check_gradient(std::uint64_t seed, std::size_t rows = 8, std::size_t dim = 512,
                                    std::size_t samples = 48) {
  const AlignConfig cfg;
  GradientCheck out;
  AlignmentBatch b;
  ProjectionHead head(dim);
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = seed + 1000003 * attempt;
    b = random_batch(s, rows, dim);
    head = ProjectionHead(random_head(s, dim, 0.3));
    out.clearance = kink_clearance(b, head, cfg);
    if (out.clearance >= kMinClearance || attempt == 20) break;
    ++out.redraws;
  }
  const LossWithGrad lg = total_loss(b, head, cfg);
  out.loss = lg.loss;

  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;
  Rng rng(seed + 1000);
  const auto d = static_cast<std::uint64_t>(dim);
  for (std::size_t s = 0; s < samples; ++s)
    entries.emplace_back(static_cast<Eigen::Index>(rng.below(d)), static_cast<Eigen::Index>(rng.below(d)));
  std::vector<std::pair<double, std::pair<Eigen::Index, Eigen::Index>>> big;
  for (Eigen::Index i = 0; i < lg.grad.rows(); ++i)
    for (Eigen::Index j = 0; j < lg.grad.cols(); ++j) big.push_back({-std::abs(lg.grad(i, j)), {i, j}});
  std::partial_sort(big.begin(), big.begin() + 16, big.end());
  for (int k = 0; k < 16; ++k) entries.push_back(big[static_cast<std::size_t>(k)].second);

  const double h = 1e-5;
  for (auto [i, j] : entries) {
    const double w = head.weights()(i, j);
    head.weights()(i, j) = w + h;
    const double up = total_loss(b, head, cfg).loss;
    head.weights()(i, j) = w - h;
    const double down = total_loss(b, head, cfg).loss;
    head.weights()(i, j) = w;
    const double numeric = (up - down) / (2 * h);
    const double analytic = lg.grad(i, j);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.entries;
    if (analytic != 0.0) ++out.active;
  }
  return out;
}

}  // namespace vistr::testing
