#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vistr/alignment.hpp"
#include "vistr/facet.hpp"
#include "vistr/table.hpp"
#include "vistr/vocabulary.hpp"

namespace vistr {

/// Daily rows starting at `start`; variable k is a Gaussian random walk
/// from `start_value`.
struct RandomWalkOptions {
  std::size_t rows = 1000;
  std::size_t vars = 1;
  std::uint64_t seed = 42;
  Timestamp start = std::chrono::sys_days{std::chrono::year{2020} / 1 / 1};
  double step_sd = 1.0;
  double start_value = 100.0;
  std::string table_id = "synthetic";
};

TimeSeriesTable random_walk_table(const RandomWalkOptions& opts);

/// Names used for random-walk variables: Open, High, Low, Close for up to
/// four variables, then V5, V6, ...
std::string synthetic_variable_name(std::size_t index, std::size_t count);

struct PlantedWindow {
  std::string category;
  RowSpan span;
  Timestamp start_time;
  Timestamp end_time;
};

/// One variable made of a slow random walk with shape windows planted at
/// seeded positions. Each window follows the vocabulary prototype of its
/// category, resampled to window_len rows, scaled by `amplitude` and
/// offset so that it starts at the walk's current level.
struct PlantedOptions {
  std::vector<std::pair<std::string, std::size_t>> plants{{"two-peak", 10}, {"valley", 2}};
  std::size_t rows = 0;  // 0: just long enough for the windows
  std::size_t window_len = 30;
  std::size_t min_gap = 20;
  std::size_t max_gap = 40;
  double amplitude = 8.0;
  double background_step = 0.2;
  double noise_sd = 0.05;
  std::uint64_t seed = 42;
  Timestamp start = std::chrono::sys_days{std::chrono::year{2021} / 1 / 1};
  std::string variable = "Apple";
  std::string table_id = "planted";
};

struct PlantedTable {
  TimeSeriesTable table;
  std::vector<PlantedWindow> windows;  // in row order

  /// {table_id, variable, rows, windows:[{category, start_idx, end_idx,
  /// start, end}]}
  nlohmann::json manifest() const;
};

PlantedTable planted_patterns_table(const PlantedOptions& opts,
                                    const TrendVocabulary& vocab = TrendVocabulary::default_vocabulary());

/// Triplet directories for the alignment commands: manifest.json plus
/// chart.f64, text.f64, sketch.f64 (little-endian float64, row-major) and
/// labels.json.
void save_alignment_batch(const AlignmentBatch& batch, const std::filesystem::path& dir);
AlignmentBatch load_alignment_batch(const std::filesystem::path& dir);  // throws IoError, FormatError

}  // namespace vistr
