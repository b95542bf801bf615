#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vistr/embedding.hpp"
#include "vistr/facet.hpp"
#include "vistr/hnsw.hpp"
#include "vistr/image.hpp"
#include "vistr/table.hpp"

namespace vistr {

/// Metadata of a visualization reference. The time range is the
/// timestamps at span.start and span.end.
struct RefMeta {
  std::string ref_id;
  std::string table_id;
  std::string variable;
  RowSpan span;
  Timestamp start_time;
  Timestamp end_time;
  ChartType chart_type = ChartType::kLine;
  std::string trend_category;
  double trend_confidence = 0.0;

  nlohmann::json to_json() const;
  static RefMeta from_json(const nlohmann::json& j);  // throws FormatError
};

struct VisualizationReference {
  RefMeta meta;
  Embedding embedding;
  std::optional<ChartImage> image;
};

/// "<table>.v<variable index>.<start>-<end>.<chart type>".
std::string make_ref_id(const std::string& table_id, std::size_t variable_index, RowSpan span, ChartType type);

struct PruneConfig {
  double threshold = 1.0;  // Euclidean, on unit vectors
  void validate() const;   // throws ConfigError unless 0 < threshold < 2
};

struct PruneResult {
  std::vector<std::size_t> retained;  // indices into the input, in greedy order
  std::vector<std::size_t> pruned;
  std::vector<std::size_t> pruned_by;  // parallel to `pruned`: the retained ref within threshold
};

/// Greedy epsilon-net per (variable, chart type). Candidates are visited by
/// time span descending, then earlier start, then ref_id; a candidate is
/// kept iff its distance to every kept reference of its group is >=
/// threshold. Every pruned reference therefore lies within threshold of a
/// kept one whose span is at least as long. Throws StoreError if the refs
/// come from different tables.
PruneResult prune(const std::vector<VisualizationReference>& refs, const PruneConfig& cfg);

double euclidean_distance(const Embedding& a, const Embedding& b);

enum class IndexMode { kExact, kApproximate };

std::string_view to_string(IndexMode mode);
IndexMode index_mode_from_string(std::string_view name);  // throws ConfigError

/// Restricts a query before ranking. A reference passes the time window
/// when its whole range lies inside [from, to].
struct KnnFilter {
  std::optional<std::string> variable;  // case-insensitive
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;
  std::optional<ChartType> chart_type;

  bool accepts(const RefMeta& meta) const;
  bool empty() const { return !variable && !from && !to && !chart_type; }
};

struct KnnHit {
  std::size_t slot = 0;
  std::string ref_id;
  double similarity = 0.0;
};

/// Dense float32 vectors plus metadata, searched by dot product. Readers
/// may run concurrently; insert() takes an exclusive lock for the whole
/// batch, so queries never observe part of a batch.
class VectorIndex {
 public:
  static constexpr int kFormatVersion = 1;

  explicit VectorIndex(IndexMode mode = IndexMode::kExact, HnswParams params = {});
  VectorIndex(const VectorIndex&) = delete;
  VectorIndex& operator=(const VectorIndex&) = delete;

  IndexMode mode() const { return mode_; }
  std::size_t size() const;
  std::size_t dim() const { return kEmbeddingDim; }

  /// Throws StoreError on a duplicate or empty ref_id (nothing is inserted)
  /// and ConfigError on a non-unit embedding.
  void insert(const std::vector<VisualizationReference>& refs);

  RefMeta meta(std::size_t slot) const;
  std::vector<RefMeta> all_meta() const;
  std::optional<std::size_t> find(const std::string& ref_id) const;
  std::vector<float> vector(std::size_t slot) const;
  void set_trend(std::size_t slot, const std::string& category, double confidence);

  /// Top-k by dot product, descending, ties by ref_id. A non-empty filter
  /// ranks the filtered set exhaustively. Exact search is used unless the
  /// index is approximate and `exact` is false. Throws EmptyResult when the
  /// index or the filtered set is empty.
  std::vector<KnnHit> query_knn(const Embedding& query, std::size_t k, const KnnFilter& filter = {},
                                bool exact = false) const;

  /// Directory layout: manifest.json, vectors.bin (little-endian float32,
  /// row-major), meta.jsonl. `attributes` is stored in the manifest. The
  /// approximate graph is rebuilt on load.
  void save(const std::filesystem::path& dir, const nlohmann::json& attributes = nlohmann::json::object()) const;
  static std::unique_ptr<VectorIndex> load(const std::filesystem::path& dir, nlohmann::json* attributes = nullptr);

 private:
  std::vector<KnnHit> exact_locked(const float* q, std::size_t k, const KnnFilter& filter) const;
  const float* row(std::size_t slot) const { return vectors_.data() + slot * kEmbeddingDim; }

  IndexMode mode_;
  HnswParams params_;
  mutable std::shared_mutex mutex_;
  std::vector<RefMeta> meta_;
  std::vector<float> vectors_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unique_ptr<HnswGraph> graph_;
};

}  // namespace vistr
