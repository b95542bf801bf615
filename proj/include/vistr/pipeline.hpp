#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vistr/changepoint.hpp"
#include "vistr/facet.hpp"
#include "vistr/parallel.hpp"
#include "vistr/refstore.hpp"
#include "vistr/render.hpp"
#include "vistr/smoothing.hpp"
#include "vistr/table.hpp"
#include "vistr/vocabulary.hpp"

namespace vistr {

struct IngestOptions {
  SmoothingConfig smoothing;
  std::optional<PhtConfig> pht;  // unset: PhtConfig::defaults_for each raw variable
  FacetConfig facets;
  std::vector<ChartType> chart_types{ChartType::kLine, ChartType::kBar, ChartType::kArea};
  PruneConfig prune;
  IndexMode mode = IndexMode::kExact;
  HnswParams hnsw;
  RenderConfig render;
  std::size_t workers = default_workers();

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
};

struct VariableStats {
  std::string name;
  std::vector<std::size_t> changepoints;
  std::size_t facets = 0;
  std::size_t refs_generated = 0;
  std::size_t refs_retained = 0;
};

struct IngestStats {
  std::size_t rows = 0;
  std::size_t refs_generated = 0;
  std::size_t refs_retained = 0;
  double prune_threshold = 1.0;
  std::vector<VariableStats> variables;

  nlohmann::json to_json() const;
  static IngestStats from_json(const nlohmann::json& j);
};

/// An ingested table: source data, smoothed variables, the retained
/// references in a vector index and their PNG images. Immutable once
/// built; share it through shared_ptr<const TableStore> snapshots.
struct TableStore {
  TimeSeriesTable table;
  std::vector<std::vector<double>> smoothed;  // parallel to table.variables
  std::unique_ptr<VectorIndex> index;
  std::map<std::string, std::vector<std::uint8_t>> images;  // ref_id -> PNG
  IngestStats stats;
  IngestOptions options;

  const std::vector<double>& smoothed_of(std::string_view variable) const;  // throws VariableError
};

/// Every reference the pipeline generates for one table before pruning:
/// smooth, detect change points, enumerate facets, render each chart type
/// and embed. Order: variable, facet, chart type. Images are not kept.
std::vector<VisualizationReference> generate_references(const TimeSeriesTable& table, const IngestOptions& opts,
                                                        const Embedder& embedder,
                                                        std::vector<VariableStats>* stats = nullptr,
                                                        std::vector<std::vector<double>>* smoothed = nullptr);

/// Full ingestion: generate, prune, classify the retained references with
/// `recognizer` and index them.
std::shared_ptr<TableStore> ingest_table(TimeSeriesTable table, const IngestOptions& opts,
                                         const TrendRecognizer& recognizer);

/// Layout: dir/{table.csv, ingest.json, manifest.json, vectors.bin,
/// meta.jsonl, images/<ref_id>.png}.
void save_table_store(const TableStore& store, const std::filesystem::path& dir);
std::shared_ptr<TableStore> load_table_store(const std::filesystem::path& dir);  // throws IoError, FormatError

/// Table ids become directory names: letters, digits, '-' and '_' only.
bool valid_table_id(std::string_view id);

}  // namespace vistr
