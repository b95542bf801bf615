#include "vistr/alignment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "vistr/errors.hpp"
#include "vistr/rng.hpp"

namespace vistr {

void AlignConfig::validate() const {
  if (!(margin_alpha > 0.0) || !(temperature_tau > 0.0) || epochs == 0 || batch_size < 2 || !(learning_rate >= 0.0)) {
    throw ConfigError(fmt::format("invalid alignment config: alpha={} tau={} epochs={} batch_size={} lr={}",
                                  margin_alpha, temperature_tau, epochs, batch_size, learning_rate));
  }
}

AlignmentBatch AlignmentBatch::subset(const std::vector<std::size_t>& rows) const {
  AlignmentBatch out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.chart.resize(n, chart.cols());
  out.text.resize(n, text.cols());
  out.sketch.resize(n, sketch.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    out.chart.row(i) = chart.row(r);
    out.text.row(i) = text.row(r);
    out.sketch.row(i) = sketch.row(r);
    if (!labels.empty()) out.labels.push_back(labels[static_cast<std::size_t>(r)]);
  }
  return out;
}

void AlignmentBatch::validate() const {
  if (chart.rows() != text.rows() || chart.rows() != sketch.rows()) {
    throw ConfigError(fmt::format("batch row counts differ: {} charts, {} texts, {} sketches", chart.rows(),
                                  text.rows(), sketch.rows()));
  }
  if (chart.cols() != text.cols() || chart.cols() != sketch.cols()) throw ConfigError("batch dimensions differ");
  if (!labels.empty() && labels.size() != rows()) throw ConfigError("label count does not match batch rows");
  for (const Matrix* m : {&chart, &text, &sketch}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      if (std::abs(m->row(i).norm() - 1.0) > 1e-6) {
        throw ConfigError(fmt::format("batch row {} is not unit-norm", i));
      }
    }
  }
}

ProjectionHead::ProjectionHead(std::size_t dim)
    : weights_(Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

ProjectionHead::ProjectionHead(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols() || weights_.rows() == 0) throw ConfigError("projection head must be square");
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

Matrix ProjectionHead::project(const Matrix& x) const { return normalize_rows(x * weights_.transpose()); }

namespace {

constexpr char kHeadMagic[4] = {'V', 'T', 'R', 'H'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("projection head file is truncated");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void write_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("projection head file is truncated");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = bits << 8 | b[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

void ProjectionHead::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write projection head '{}'", path.string()));
  out.write(kHeadMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(dim()));
  for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights_.cols(); ++c) write_f64(out, weights_(r, c));
  }
  if (!out) throw IoError(fmt::format("failed writing projection head '{}'", path.string()));

  std::ofstream side(path.string() + ".json");
  if (!side) throw IoError(fmt::format("cannot write sidecar for '{}'", path.string()));
  nlohmann::json meta = {{"magic", "VTRH"},
                         {"version", kFormatVersion},
                         {"d", dim()},
                         {"dtype", "float64"},
                         {"byte_order", "little"},
                         {"layout", "row-major"}};
  side << meta.dump(2) << '\n';
}

ProjectionHead ProjectionHead::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open projection head '{}'", path.string()));
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kHeadMagic, 4) != 0) throw FormatError("not a projection head file");
  const auto version = read_u32(in);
  if (version != kFormatVersion) {
    throw FormatError(fmt::format("projection head version {} is not supported (expected {})", version,
                                  kFormatVersion));
  }
  const auto d = read_u32(in);
  if (d == 0 || d > 8192) throw FormatError(fmt::format("implausible projection head dimension {}", d));
  Matrix w(d, d);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = read_f64(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("projection head file has trailing bytes");
  return ProjectionHead(std::move(w));
}

Matrix pair_entropy_matrix(const Matrix& a, const Matrix& b, double tau) {
  const Matrix logits = (a * b.transpose()) / tau;
  Matrix h(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    h.row(i) = (lse - logits.row(i).array()).matrix();
  }
  return h;
}

LossWithGrad triplet_loss(const Matrix& h, double alpha) {
  const Eigen::Index n = h.rows();
  if (n < 2 || h.cols() != n) throw ConfigError("triplet loss needs a square matrix with at least 2 rows");
  LossWithGrad out;
  out.grad = Matrix::Zero(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index row_neg = -1, col_neg = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (row_neg < 0 || h(i, j) < h(i, row_neg)) row_neg = j;
      if (col_neg < 0 || h(j, i) < h(col_neg, i)) col_neg = j;
    }
    // Differences first: an exactly representable shift of H then leaves
    // every term, and so the loss, bit-identical.
    const double row_term = alpha + (h(i, i) - h(i, row_neg));
    const double col_term = alpha + (h(i, i) - h(col_neg, i));
    double loss_i = 0.0;
    if (row_term > 0.0) {
      loss_i += row_term;
      out.grad(i, i) += inv_n;
      out.grad(i, row_neg) -= inv_n;
    }
    if (col_term > 0.0) {
      loss_i += col_term;
      out.grad(i, i) += inv_n;
      out.grad(col_neg, i) -= inv_n;
    }
    total += loss_i;
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

namespace {

// Loss of one pairing and its gradient with respect to the raw (unprojected)
// query embeddings x, through u = x W^T and q = u / |u|.
double pairing_loss(const Matrix& chart, const Matrix& x, const Matrix& w, const AlignConfig& cfg, Matrix& grad_w) {
  const Matrix u = x * w.transpose();
  Eigen::VectorXd norms = u.rowwise().norm();
  Matrix q = u;
  for (Eigen::Index j = 0; j < q.rows(); ++j) q.row(j) /= norms(j);

  const double tau = cfg.temperature_tau;
  const Matrix logits = chart * q.transpose() / tau;
  Matrix p(logits.rows(), logits.cols());
  Matrix h(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    const double z = e.sum();
    p.row(i) = e / z;
    h.row(i) = ((m + std::log(z)) - logits.row(i).array()).matrix();
  }
  const LossWithGrad tl = triplet_loss(h, cfg.margin_alpha);

  // dH_ij/dS_ik = (P_ik - [j == k]) / tau.
  const Eigen::VectorXd g_rowsum = tl.grad.rowwise().sum();
  const Matrix ds = (p.array().colwise() * g_rowsum.array() - tl.grad.array()).matrix() / tau;
  const Matrix dq = ds.transpose() * chart;
  Matrix du(dq.rows(), dq.cols());
  for (Eigen::Index j = 0; j < du.rows(); ++j) {
    const double proj = q.row(j).dot(dq.row(j));
    du.row(j) = (dq.row(j) - proj * q.row(j)) / norms(j);
  }
  grad_w += du.transpose() * x;
  return tl.loss;
}

}  // namespace

LossWithGrad total_loss(const AlignmentBatch& batch, const ProjectionHead& head, const AlignConfig& cfg) {
  if (batch.rows() < 2) throw ConfigError("alignment batch needs at least 2 rows");
  LossWithGrad out;
  out.grad = Matrix::Zero(head.weights().rows(), head.weights().cols());
  out.loss = pairing_loss(batch.chart, batch.text, head.weights(), cfg, out.grad) +
             pairing_loss(batch.chart, batch.sketch, head.weights(), cfg, out.grad);
  return out;
}

TrainResult train_projection(const std::vector<AlignmentBatch>& batches, const AlignConfig& cfg,
                             std::optional<ProjectionHead> init) {
  cfg.validate();
  if (batches.empty()) throw ConfigError("training needs at least one batch");
  const std::size_t dim = static_cast<std::size_t>(batches.front().chart.cols());
  TrainResult result{init ? std::move(*init) : ProjectionHead(dim), {}};
  if (result.head.dim() != dim) throw ConfigError("projection head dimension does not match the batches");

  Rng rng(cfg.seed);
  std::vector<AlignmentBatch> minibatches;
  for (const auto& batch : batches) {
    batch.validate();
    std::vector<std::size_t> order(batch.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (order.size() - end == 1) end = order.size();
      if (end - start >= 2) {
        minibatches.push_back(batch.subset(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                                    order.begin() + static_cast<std::ptrdiff_t>(end))));
      }
      start = end;
    }
  }
  if (minibatches.empty()) throw ConfigError("no minibatch has at least 2 rows");

  double lr = cfg.learning_rate;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0 && epoch % 10 == 0) lr *= 0.5;
    double sum = 0.0;
    for (const auto& mb : minibatches) {
      const LossWithGrad lg = total_loss(mb, result.head, cfg);
      if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
        throw DivergenceError(epoch, fmt::format("non-finite loss at epoch {}", epoch));
      }
      sum += lg.loss;
      if (lr > 0.0) result.head.weights() -= lr * lg.grad;
    }
    result.loss_trace.push_back(sum / static_cast<double>(minibatches.size()));
  }
  return result;
}

double weighted_f1(const std::vector<CategoryScore>& scores) {
  if (scores.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : scores) s += c.f1;
  return s / static_cast<double>(scores.size());
}

Metrics evaluate_retrieval(const AlignmentBatch& test, const ProjectionHead& head, std::size_t category_count,
                           AbsentCategoryPolicy policy) {
  const std::size_t n = test.rows();
  if (test.labels.size() != n) {
    throw LabelError(fmt::format("{} of {} rows are labeled", test.labels.size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (test.labels[i] >= category_count) {
      throw LabelError(fmt::format("row {} has label {} outside {} categories", i, test.labels[i], category_count),
                       {{"row", i}});
    }
  }
  std::vector<std::size_t> tp(category_count, 0), predicted(category_count, 0), actual(category_count, 0);
  Metrics m;
  std::size_t correct = 0;
  for (const Matrix* queries : {&test.text, &test.sketch}) {
    const Matrix s = head.project(*queries) * test.chart.transpose();
    for (Eigen::Index q = 0; q < s.rows(); ++q) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < s.cols(); ++c) {
        if (s(q, c) > s(q, best)) best = c;
      }
      const std::size_t truth = test.labels[static_cast<std::size_t>(q)];
      const std::size_t pred = test.labels[static_cast<std::size_t>(best)];
      if (best == q) ++correct;
      ++actual[truth];
      ++predicted[pred];
      if (truth == pred) ++tp[truth];
      ++m.queries;
    }
  }
  m.acc = m.queries ? static_cast<double>(correct) / static_cast<double>(m.queries) : 0.0;
  for (std::size_t c = 0; c < category_count; ++c) {
    if (policy == AbsentCategoryPolicy::kPresentOnly && actual[c] == 0) continue;
    CategoryScore sc{c, 0.0, 0.0, 0.0, actual[c]};
    if (predicted[c] > 0) sc.precision = static_cast<double>(tp[c]) / static_cast<double>(predicted[c]);
    if (actual[c] > 0) sc.recall = static_cast<double>(tp[c]) / static_cast<double>(actual[c]);
    if (sc.precision + sc.recall > 0.0) sc.f1 = 2.0 * sc.precision * sc.recall / (sc.precision + sc.recall);
    m.per_category.push_back(sc);
  }
  m.wf = weighted_f1(m.per_category);
  return m;
}

Matrix random_orthogonal(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix g(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) g(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign-fixing the diagonal of R makes Q Haar-distributed.
  for (Eigen::Index i = 0; i < d; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

RotatedTask make_rotated_task(std::size_t categories, std::size_t per_category, double test_fraction,
                              std::uint64_t seed, std::size_t dim, double spread, double jitter) {
  if (categories == 0 || per_category < 2 || !(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("rotated task needs categories >= 1, per_category >= 2 and a test fraction in (0, 1)");
  }
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  const double noise_sd = 1.0 / std::sqrt(static_cast<double>(dim));
  auto gaussian = [&](double sd) {
    Eigen::RowVectorXd v(d);
    for (Eigen::Index k = 0; k < d; ++k) v(k) = rng.normal() * sd;
    return v;
  };

  RotatedTask task;
  task.rotation = random_orthogonal(dim, seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t n = categories * per_category;
  AlignmentBatch all;
  all.chart.resize(static_cast<Eigen::Index>(n), d);
  all.text.resize(static_cast<Eigen::Index>(n), d);
  all.sketch.resize(static_cast<Eigen::Index>(n), d);
  for (std::size_t c = 0; c < categories; ++c) {
    const Eigen::RowVectorXd center = gaussian(noise_sd).normalized();
    for (std::size_t s = 0; s < per_category; ++s) {
      const auto row = static_cast<Eigen::Index>(c * per_category + s);
      const Eigen::RowVectorXd chart = (center + spread * gaussian(noise_sd)).normalized();
      const Eigen::RowVectorXd rotated = chart * task.rotation.transpose();
      all.chart.row(row) = chart;
      all.text.row(row) = (rotated + jitter * gaussian(noise_sd)).normalized();
      all.sketch.row(row) = (rotated + jitter * gaussian(noise_sd)).normalized();
      all.labels.push_back(c);
    }
  }

  // Stratified split: the same number of test rows from every category.
  const auto test_per = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(per_category))));
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t c = 0; c < categories; ++c) {
    std::vector<std::size_t> rows(per_category);
    std::iota(rows.begin(), rows.end(), c * per_category);
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.below(i)]);
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(test_per));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(test_per), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  task.train = all.subset(train_rows);
  task.test = all.subset(test_rows);
  return task;
}

}  // namespace vistr
