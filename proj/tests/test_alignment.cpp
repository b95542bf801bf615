#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <gtest/gtest.h>

#include "gradient_check.hpp"
#include "support.hpp"
#include "vistr/alignment.hpp"
#include "vistr/errors.hpp"
#include "vistr/synth.hpp"

using namespace vistr;
using vistr::testing::TempDir;

namespace {

// Direct evaluation of the hinge formula, entry by entry.
double hinge_oracle(const Matrix& h, double alpha) {
  const auto n = h.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_min = INFINITY, col_min = INFINITY;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      row_min = std::min(row_min, h(i, j));
      col_min = std::min(col_min, h(j, i));
    }
    total += std::max(0.0, alpha + h(i, i) - row_min) + std::max(0.0, alpha + h(i, i) - col_min);
  }
  return total / double(n);
}

Matrix basis_rows(std::size_t n, std::size_t dim) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
  return m;
}

AlignmentBatch aligned_batch(std::size_t n, std::size_t dim) {
  AlignmentBatch b;
  b.chart = b.text = b.sketch = basis_rows(n, dim);
  return b;
}

}  // namespace

TEST(PairEntropy, ClosedFormForOrthogonalRows) {
  const Matrix a = basis_rows(2, 8);
  const Matrix h = pair_entropy_matrix(a, a, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(h(0, 0), -std::log(e / (e + 1)), 1e-12);
  EXPECT_NEAR(h(1, 1), 0.3133, 5e-5);
  EXPECT_NEAR(h(0, 1), -std::log(1 / (e + 1)), 1e-12);
  EXPECT_NEAR(h(1, 0), 1.3133, 5e-5);
}

TEST(PairEntropy, RowsAreDistributions) {
  Rng rng(3);
  const Matrix a = vistr::testing::random_rows(rng, 6, 32), b = vistr::testing::random_rows(rng, 6, 32);
  const Matrix h = pair_entropy_matrix(a, b, 0.1);
  for (Eigen::Index i = 0; i < h.rows(); ++i) EXPECT_NEAR((-h.row(i).array()).exp().sum(), 1.0, 1e-12);
  const Matrix flat = pair_entropy_matrix(a, b, 1e12);
  EXPECT_LE((flat.array() - std::log(6.0)).abs().maxCoeff(), 1e-9);
}

TEST(TripletLoss, SatisfiedMarginIsZero) {
  Matrix h = Matrix::Constant(4, 4, 2.0);
  h.diagonal().setConstant(0.1);
  const auto lg = triplet_loss(h, 0.2);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_TRUE(lg.grad.isZero());
}

TEST(TripletLoss, HandExample) {
  Matrix h(2, 2);
  h << 1.0, 0.5, 0.4, 1.2;
  const auto lg = triplet_loss(h, 0.2);
  EXPECT_EQ(lg.loss, 1.7);
  EXPECT_EQ(hinge_oracle(h, 0.2), 1.7);
  // Each active hinge adds +1 to its diagonal and -1 to its negative, over N.
  Matrix want(2, 2);
  want << 1.0, -1.0, -1.0, 1.0;
  EXPECT_TRUE(lg.grad.isApprox(want));
}

// Adding 3.7 rounds most entries, so fl(H + 3.7) is a different matrix whose
// exact loss can differ in the last bit. Snapping H to the grid where the
// shift is exact isolates the property of the loss itself.
Matrix snap_for_shift(const Matrix& h, double c) { return ((h.array() + c) - c).matrix(); }

TEST(TripletLoss, ShiftInvarianceIsBitExact) {
  Matrix h(2, 2);
  h << 1.0, 0.5, 0.4, 1.2;
  const Matrix snapped = snap_for_shift(h, 3.7);
  ASSERT_TRUE((((snapped.array() + 3.7) - 3.7).matrix() - snapped).isZero(0.0));
  EXPECT_EQ(triplet_loss((snapped.array() + 3.7).matrix(), 0.2).loss, triplet_loss(snapped, 0.2).loss);
  Rng shift_rng(9);
  for (int t = 0; t < 50; ++t) {
    Matrix r(6, 6);
    for (Eigen::Index i = 0; i < 36; ++i) r.data()[i] = shift_rng.uniform() * 3;
    const Matrix s = snap_for_shift(r, 3.7);
    EXPECT_EQ(triplet_loss((s.array() + 3.7).matrix(), 0.3).loss, triplet_loss(s, 0.3).loss);
  }
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    Matrix r(5, 5);
    for (Eigen::Index i = 0; i < 25; ++i) r.data()[i] = std::floor(rng.uniform() * 64) / 16;  // dyadic entries
    EXPECT_EQ(triplet_loss((r.array() + 3.75).matrix(), 0.25).loss, triplet_loss(r, 0.25).loss);
  }
}

TEST(TripletLoss, MatchesOracleAndIsMonotoneInMargin) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    Matrix h(7, 7);
    for (Eigen::Index i = 0; i < 49; ++i) h.data()[i] = rng.uniform() * 3;
    const double alpha = rng.uniform();
    EXPECT_NEAR(triplet_loss(h, alpha).loss, hinge_oracle(h, alpha), 1e-12);
    EXPECT_LE(triplet_loss(h, 1e-12).loss, triplet_loss(h, alpha).loss);
  }
}

TEST(TotalLoss, PerfectAlignmentIsZero) {
  const auto b = aligned_batch(6, 16);
  const auto lg = total_loss(b, ProjectionHead(16), AlignConfig{});
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_TRUE(lg.grad.isZero());
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = vistr::testing::check_gradient(seed, 8, 48, 200);
    ASSERT_GE(r.clearance, vistr::testing::kMinClearance) << "seed " << seed << " sits on a kink";
    EXPECT_GT(r.loss, 0.0) << "seed " << seed;
    EXPECT_GT(r.active, r.entries / 2) << "seed " << seed;
    EXPECT_LE(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(Train, AlignedBatchesLeaveHeadUnchanged) {
  AlignConfig cfg;
  cfg.epochs = 3;
  const auto r = train_projection({aligned_batch(8, 16)}, cfg);
  EXPECT_EQ(r.loss_trace.front(), 0.0);
  EXPECT_TRUE(r.head.weights() == Matrix::Identity(16, 16));
}

TEST(Train, ZeroLearningRateKeepsInitialization) {
  AlignConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 0.0;
  const auto task = make_rotated_task(5, 10, 0.2, 4, 32);
  const Matrix init = vistr::testing::random_head(9, 32, 0.5);
  const auto r = train_projection({task.train}, cfg, ProjectionHead(init));
  EXPECT_TRUE(r.head.weights() == init);
}

TEST(Train, RotatedTaskLossDecreasesMonotonically) {
  AlignConfig cfg;  // learning rate 1e-3
  const auto task = make_rotated_task(23, 30, 0.2, 42);
  const auto r = train_projection({task.train}, cfg);
  ASSERT_EQ(r.loss_trace.size(), 30u);
  int rises = 0;
  for (std::size_t e = 1; e < r.loss_trace.size(); ++e)
    if (r.loss_trace[e] > r.loss_trace[e - 1]) ++rises;
  EXPECT_LE(rises, 2);
  EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
}

TEST(Train, NonFiniteLossRaisesDivergence) {
  AlignConfig cfg;
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  const auto task = make_rotated_task(5, 10, 0.2, 4, 32);
  try {
    train_projection({task.train}, cfg);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_LE(e.epoch(), 1u);
  }
}

TEST(Train, RejectsBadConfig) {
  AlignConfig cfg;
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = AlignConfig{};
  cfg.temperature_tau = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Metrics, SingleCategoryPerfectRetrieval) {
  AlignmentBatch b = aligned_batch(5, 16);
  b.labels.assign(5, 3);
  const auto all = evaluate_retrieval(b, ProjectionHead(16), 23, AbsentCategoryPolicy::kAllCategories);
  EXPECT_EQ(all.acc, 1.0);
  EXPECT_NEAR(all.wf, 1.0 / 23.0, 1e-12);
  EXPECT_EQ(all.per_category.size(), 23u);
  EXPECT_EQ(all.queries, 10u);
  const auto present = evaluate_retrieval(b, ProjectionHead(16), 23, AbsentCategoryPolicy::kPresentOnly);
  EXPECT_EQ(present.wf, 1.0);
}

TEST(Metrics, MeanOfPresentCategoryScores) {
  EXPECT_EQ(weighted_f1({{0, 1, 1, 1, 4}, {1, 0, 0, 0, 4}}), 0.5);
}

TEST(Metrics, WfEqualsRecomputedFormula) {
  const auto task = make_rotated_task(23, 10, 0.5, 8, 64);
  for (auto policy : {AbsentCategoryPolicy::kPresentOnly, AbsentCategoryPolicy::kAllCategories}) {
    const auto m = evaluate_retrieval(task.test, ProjectionHead(64), 23, policy);
    double s = 0.0;
    for (const auto& c : m.per_category) {
      const double f1 = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
      EXPECT_NEAR(c.f1, f1, 1e-12);
      s += f1;
    }
    EXPECT_NEAR(m.wf, s / double(m.per_category.size()), 1e-9);
  }
}

TEST(Metrics, RandomEmbeddingsRetrieveAtChance) {
  double total = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(1000 + s);
    AlignmentBatch b;
    b.chart = vistr::testing::random_rows(rng, 100, 64);
    b.text = vistr::testing::random_rows(rng, 100, 64);
    b.sketch = vistr::testing::random_rows(rng, 100, 64);
    for (int i = 0; i < 100; ++i) b.labels.push_back(rng.below(23));
    total += evaluate_retrieval(b, ProjectionHead(64), 23).acc;
  }
  // 10000 Bernoulli(0.01) trials: standard error 0.001.
  EXPECT_NEAR(total / seeds, 0.01, 0.004);
}

TEST(Metrics, RetrievalIgnoresPositiveRescaling) {
  const auto task = make_rotated_task(6, 10, 0.5, 2, 32);
  const Matrix w = vistr::testing::random_head(4, 32, 0.4);
  const auto a = evaluate_retrieval(task.test, ProjectionHead(w), 6);
  const auto b = evaluate_retrieval(task.test, ProjectionHead(Matrix(3.5 * w)), 6);
  EXPECT_EQ(a.acc, b.acc);
  EXPECT_EQ(a.wf, b.wf);
}

TEST(Metrics, MissingOrInvalidLabels) {
  AlignmentBatch b = aligned_batch(4, 8);
  EXPECT_THROW(evaluate_retrieval(b, ProjectionHead(8), 23), LabelError);
  b.labels = {0, 1, 2, 23};
  EXPECT_THROW(evaluate_retrieval(b, ProjectionHead(8), 23), LabelError);
}

TEST(ProjectionHeadFile, RoundTripAndCorruption) {
  TempDir dir("head");
  const ProjectionHead head(vistr::testing::random_head(3, 24, 0.7));
  const auto path = dir.path() / "head.bin";
  head.save(path);
  EXPECT_TRUE(std::filesystem::exists(path.string() + ".json"));
  EXPECT_TRUE(ProjectionHead::load(path).weights() == head.weights());
  EXPECT_EQ(std::filesystem::file_size(path), 12u + 24u * 24u * 8u);

  std::filesystem::resize_file(path, 12 + 100);
  EXPECT_THROW(ProjectionHead::load(path), FormatError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "JUNKJUNKJUNK";
  }
  EXPECT_THROW(ProjectionHead::load(path), FormatError);
  EXPECT_THROW(ProjectionHead::load(dir.path() / "missing.bin"), IoError);
}

TEST(ProjectionHeadFile, ProjectedRowsAreUnitNorm) {
  Rng rng(6);
  const ProjectionHead head(vistr::testing::random_head(1, 16, 1.0));
  const Matrix p = head.project(vistr::testing::random_rows(rng, 10, 16));
  for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).norm(), 1.0, 1e-12);
}
