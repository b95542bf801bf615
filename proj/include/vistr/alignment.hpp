#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace vistr {

using Matrix = Eigen::MatrixXd;

struct AlignConfig {
  double margin_alpha = 0.2;
  double temperature_tau = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;  // minibatch partition

  void validate() const;  // throws ConfigError
};

/// Row i of chart, text and sketch is one matched triple. `labels`, when
/// present, holds one category index per row.
struct AlignmentBatch {
  Matrix chart;
  Matrix text;
  Matrix sketch;
  std::vector<std::size_t> labels;

  std::size_t rows() const { return static_cast<std::size_t>(chart.rows()); }
  AlignmentBatch subset(const std::vector<std::size_t>& rows) const;
  void validate() const;  // throws ConfigError
};

/// Linear map applied to text and sketch embeddings; outputs are
/// re-normalized. Charts are never projected.
class ProjectionHead {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  explicit ProjectionHead(std::size_t dim = 512);
  explicit ProjectionHead(Matrix weights);

  std::size_t dim() const { return static_cast<std::size_t>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }
  Matrix& weights() { return weights_; }

  /// Rows of x mapped through W and scaled to unit length.
  Matrix project(const Matrix& x) const;

  /// Little-endian binary: "VTRH", u32 version, u32 d, d*d float64
  /// row-major; plus `<path>.json` describing the layout.
  void save(const std::filesystem::path& path) const;
  static ProjectionHead load(const std::filesystem::path& path);  // throws FormatError, IoError

 private:
  Matrix weights_;
};

/// Rows of `m` scaled to unit length.
Matrix normalize_rows(const Matrix& m);

/// H_ij = -log softmax_j(a_i . b_j / tau): row-wise cross-entropy of
/// pairing a_i with b_j. Smaller is more similar; every row of exp(-H)
/// sums to 1.
Matrix pair_entropy_matrix(const Matrix& a, const Matrix& b, double tau);

struct LossWithGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Bidirectional hinge with hardest negatives: for each i,
/// [alpha + H_ii - min_{j!=i} H_ij]+ + [alpha + H_ii - min_{k!=i} H_ki]+,
/// averaged over rows. Ties pick the lowest index; a hinge at exactly 0 is
/// inactive and contributes no gradient.
LossWithGrad triplet_loss(const Matrix& h, double alpha);

/// L = triplet(H(chart, head(text))) + triplet(H(chart, head(sketch))) and
/// its gradient with respect to the head weights.
LossWithGrad total_loss(const AlignmentBatch& batch, const ProjectionHead& head, const AlignConfig& cfg);

struct TrainResult {
  ProjectionHead head;
  std::vector<double> loss_trace;  // mean minibatch loss per epoch
};

/// Plain gradient descent; the learning rate halves every 10 epochs. Rows
/// of each input batch are shuffled once (seeded) and cut into fixed
/// minibatches of cfg.batch_size; a trailing minibatch of one row joins
/// its predecessor. Throws DivergenceError on a non-finite loss.
TrainResult train_projection(const std::vector<AlignmentBatch>& batches, const AlignConfig& cfg,
                             std::optional<ProjectionHead> init = std::nullopt);

struct CategoryScore {
  std::size_t category = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

enum class AbsentCategoryPolicy {
  kPresentOnly,    // average over categories that occur among the query labels
  kAllCategories,  // average over all category_count categories; absent ones score 0
};

struct Metrics {
  double acc = 0.0;
  double wf = 0.0;
  std::vector<CategoryScore> per_category;  // the categories averaged by wf
  std::size_t queries = 0;
};

/// Uniform mean of per-category F1.
double weighted_f1(const std::vector<CategoryScore>& scores);

/// Each projected text and sketch row retrieves its most similar chart
/// (lowest index on ties). acc counts retrievals of the query's own row;
/// precision and recall compare the retrieved chart's label with the
/// query's. Throws LabelError when labels are missing or out of range.
Metrics evaluate_retrieval(const AlignmentBatch& test, const ProjectionHead& head, std::size_t category_count,
                           AbsentCategoryPolicy policy = AbsentCategoryPolicy::kPresentOnly);

/// Seeded synthetic task: `categories` x `per_category` chart embeddings
/// normalize(center_c + spread * n) around random category directions, with
/// text and sketch embeddings normalize(R chart + jitter * n') for one fixed
/// Haar-random rotation R (n, n' have i.i.d. N(0, 1/dim) components). A
/// linear head can undo the rotation by construction. The split is
/// stratified: round(test_fraction * per_category) test rows per category.
struct RotatedTask {
  AlignmentBatch train;
  AlignmentBatch test;
  Matrix rotation;
};

RotatedTask make_rotated_task(std::size_t categories, std::size_t per_category, double test_fraction,
                              std::uint64_t seed, std::size_t dim = 512, double spread = 2.0,
                              double jitter = 0.1);

/// Haar-distributed orthogonal matrix.
Matrix random_orthogonal(std::size_t dim, std::uint64_t seed);

}  // namespace vistr
