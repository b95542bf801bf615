#include "vistr/synth.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "vistr/errors.hpp"
#include "vistr/rng.hpp"

namespace vistr {

namespace {

constexpr std::chrono::seconds kDay{86400};

std::vector<Timestamp> daily(Timestamp start, std::size_t rows) {
  std::vector<Timestamp> ts(rows);
  for (std::size_t i = 0; i < rows; ++i) ts[i] = start + kDay * static_cast<long>(i);
  return ts;
}

// Linear interpolation of a prototype at x in [0, 1].
double sample_prototype(const std::vector<double>& p, double x) {
  const double pos = x * static_cast<double>(p.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), p.size() - 2);
  const double f = pos - static_cast<double>(i);
  return p[i] + f * (p[i + 1] - p[i]);
}

}  // namespace

std::string synthetic_variable_name(std::size_t index, std::size_t count) {
  static constexpr const char* kOhlc[] = {"Open", "High", "Low", "Close"};
  if (count <= 4) return kOhlc[index];
  return fmt::format("V{}", index + 1);
}

TimeSeriesTable random_walk_table(const RandomWalkOptions& opts) {
  if (opts.rows < 2) throw ConfigError("random walk needs at least two rows");
  if (opts.vars == 0) throw ConfigError("random walk needs at least one variable");
  if (!(opts.step_sd >= 0.0)) throw ConfigError("step_sd must be non-negative");
  Rng rng(opts.seed);
  TimeSeriesTable t;
  t.table_id = opts.table_id;
  t.timestamps = daily(opts.start, opts.rows);
  for (std::size_t v = 0; v < opts.vars; ++v) {
    Variable var{synthetic_variable_name(v, opts.vars), std::vector<double>(opts.rows)};
    double x = opts.start_value;
    for (std::size_t i = 0; i < opts.rows; ++i) {
      if (i > 0) x += rng.normal(0.0, opts.step_sd);
      var.values[i] = x;
    }
    t.variables.push_back(std::move(var));
  }
  return t;
}

nlohmann::json PlantedTable::manifest() const {
  nlohmann::json windows_json = nlohmann::json::array();
  for (const auto& w : windows) {
    windows_json.push_back({{"category", w.category},
                            {"start_idx", w.span.start},
                            {"end_idx", w.span.end},
                            {"start", format_timestamp(w.start_time)},
                            {"end", format_timestamp(w.end_time)}});
  }
  return {{"table_id", table.table_id},
          {"variable", table.variables.at(0).name},
          {"rows", table.rows()},
          {"windows", windows_json}};
}

PlantedTable planted_patterns_table(const PlantedOptions& opts, const TrendVocabulary& vocab) {
  if (opts.window_len < 8) throw ConfigError("window_len must be at least 8");
  if (opts.min_gap > opts.max_gap) throw ConfigError("min_gap must not exceed max_gap");
  if (!(opts.amplitude > 0.0)) throw ConfigError("amplitude must be positive");
  if (!(opts.background_step >= 0.0) || !(opts.noise_sd >= 0.0)) {
    throw ConfigError("background_step and noise_sd must be non-negative");
  }

  std::vector<std::size_t> order;
  for (const auto& [name, count] : opts.plants) {
    const std::size_t c = vocab.index_of(name);
    order.insert(order.end(), count, c);
  }
  if (order.empty()) throw ConfigError("at least one planted window is required");
  Rng rng(opts.seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::size_t> gaps(order.size() + 1);
  for (auto& g : gaps) g = opts.min_gap + rng.below(opts.max_gap - opts.min_gap + 1);
  std::size_t needed = gaps.back();
  for (std::size_t i = 0; i < order.size(); ++i) needed += gaps[i] + opts.window_len;
  if (opts.rows != 0 && opts.rows < needed) {
    throw ConfigError(fmt::format("{} rows requested but the windows need {}", opts.rows, needed),
                      {{"rows", opts.rows}, {"needed", needed}});
  }
  const std::size_t rows = std::max(opts.rows, needed);

  // Background walk plus planted offsets, so the level after a window
  // carries on from where the window ended.
  std::vector<double> values(rows);
  PlantedTable out;
  out.table.table_id = opts.table_id;
  out.table.timestamps = daily(opts.start, rows);
  double level = 100.0;
  std::size_t row = 0;
  auto background = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && row < rows; ++k, ++row) {
      if (row > 0) level += rng.normal(0.0, opts.background_step);
      values[row] = level;
    }
  };
  for (std::size_t w = 0; w < order.size(); ++w) {
    background(gaps[w]);
    const auto& proto = vocab.at(order[w]).prototype;
    const double base = level;
    const double p0 = sample_prototype(proto, 0.0);
    const std::size_t start = row;
    for (std::size_t k = 0; k < opts.window_len; ++k, ++row) {
      const double x = static_cast<double>(k) / static_cast<double>(opts.window_len - 1);
      values[row] = base + opts.amplitude * (sample_prototype(proto, x) - p0);
    }
    level = values[row - 1];
    const RowSpan span{start, row - 1};
    out.windows.push_back({vocab.at(order[w]).name, span, out.table.timestamps[span.start],
                           out.table.timestamps[span.end]});
  }
  background(rows - row);
  for (auto& v : values) v += rng.normal(0.0, opts.noise_sd);
  out.table.variables.push_back({opts.variable, std::move(values)});
  return out;
}

namespace {

void write_f64(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  static_assert(std::endian::native == std::endian::little, "float64 files are little-endian");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

Matrix read_f64(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() != rows * cols * sizeof(double)) {
    throw FormatError(fmt::format("'{}' has {} bytes, expected {}", path.string(), bytes.size(),
                                  rows * cols * sizeof(double)));
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double v;
      std::memcpy(&v, bytes.data() + (r * cols + c) * sizeof v, sizeof v);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

}  // namespace

void save_alignment_batch(const AlignmentBatch& batch, const std::filesystem::path& dir) {
  batch.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  write_f64(dir / "chart.f64", batch.chart);
  write_f64(dir / "text.f64", batch.text);
  write_f64(dir / "sketch.f64", batch.sketch);
  const nlohmann::json manifest = {{"version", 1}, {"rows", batch.rows()}, {"dim", batch.chart.cols()}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  std::ofstream(dir / "labels.json") << nlohmann::json(batch.labels).dump() << "\n";
}

AlignmentBatch load_alignment_batch(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  nlohmann::json labels;
  {
    std::ifstream m(dir / "manifest.json");
    std::ifstream l(dir / "labels.json");
    if (!m || !l) throw IoError(fmt::format("'{}' is not a triplet directory", dir.string()));
    try {
      manifest = nlohmann::json::parse(m);
      labels = nlohmann::json::parse(l);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(fmt::format("malformed triplet manifest in '{}': {}", dir.string(), e.what()));
    }
  }
  AlignmentBatch b;
  try {
    if (manifest.at("version").get<int>() != 1) throw FormatError("unsupported triplet format version");
    const auto rows = manifest.at("rows").get<std::size_t>();
    const auto dim = manifest.at("dim").get<std::size_t>();
    b.chart = read_f64(dir / "chart.f64", rows, dim);
    b.text = read_f64(dir / "text.f64", rows, dim);
    b.sketch = read_f64(dir / "sketch.f64", rows, dim);
    b.labels = labels.get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed triplet manifest in '{}': {}", dir.string(), e.what()));
  }
  if (b.labels.size() != b.rows()) throw FormatError("labels.json length does not match rows");
  return b;
}

}  // namespace vistr
