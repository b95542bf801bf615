#include "vistr/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {

void IngestOptions::validate() const {
  smoothing.validate();
  if (pht) pht->validate();
  prune.validate();
  render.validate();
  if (chart_types.empty()) throw ConfigError("at least one chart type is required");
  for (auto t : chart_types) {
    if (t == ChartType::kSketch) throw ConfigError("sketch is not a chart type");
  }
  if (facets.max_facets == 0) throw ConfigError("max_facets must be positive");
}

nlohmann::json IngestOptions::to_json() const {
  std::vector<std::string> types;
  for (auto t : chart_types) types.emplace_back(to_string(t));
  nlohmann::json j = {{"smoothing", {{"sigma", smoothing.sigma}, {"radius", smoothing.radius}}},
                      {"facets", {{"min_facet_len", facets.min_facet_len}, {"max_facets", facets.max_facets}}},
                      {"chart_types", types},
                      {"prune_threshold", prune.threshold},
                      {"mode", std::string(to_string(mode))}};
  if (pht) j["pht"] = {{"delta", pht->delta}, {"lambda", pht->lambda}, {"two_sided", pht->two_sided}};
  return j;
}

namespace {

IngestOptions options_from_json(const nlohmann::json& j) {
  IngestOptions o;
  o.smoothing.sigma = j.at("smoothing").at("sigma").get<double>();
  o.smoothing.radius = j.at("smoothing").at("radius").get<int>();
  o.facets.min_facet_len = j.at("facets").at("min_facet_len").get<std::size_t>();
  o.facets.max_facets = j.at("facets").at("max_facets").get<std::size_t>();
  o.chart_types.clear();
  for (const auto& t : j.at("chart_types")) o.chart_types.push_back(chart_type_from_string(t.get<std::string>()));
  o.prune.threshold = j.at("prune_threshold").get<double>();
  o.mode = index_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("pht")) {
    o.pht = PhtConfig{j["pht"].at("delta").get<double>(), j["pht"].at("lambda").get<double>(),
                      j["pht"].at("two_sided").get<bool>()};
  }
  return o;
}

}  // namespace

nlohmann::json IngestStats::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : variables) {
    vars.push_back({{"name", v.name},
                    {"changepoints", v.changepoints},
                    {"facets", v.facets},
                    {"refs_generated", v.refs_generated},
                    {"refs_retained", v.refs_retained}});
  }
  return {{"rows", rows},
          {"refs_generated", refs_generated},
          {"refs_retained", refs_retained},
          {"prune_threshold", prune_threshold},
          {"variables", vars}};
}

IngestStats IngestStats::from_json(const nlohmann::json& j) {
  IngestStats s;
  s.rows = j.at("rows").get<std::size_t>();
  s.refs_generated = j.at("refs_generated").get<std::size_t>();
  s.refs_retained = j.at("refs_retained").get<std::size_t>();
  s.prune_threshold = j.at("prune_threshold").get<double>();
  for (const auto& v : j.at("variables")) {
    s.variables.push_back({v.at("name").get<std::string>(), v.at("changepoints").get<std::vector<std::size_t>>(),
                           v.at("facets").get<std::size_t>(), v.at("refs_generated").get<std::size_t>(),
                           v.at("refs_retained").get<std::size_t>()});
  }
  return s;
}

const std::vector<double>& TableStore::smoothed_of(std::string_view variable) const {
  const auto idx = table.find_variable(variable);
  if (!idx) {
    throw VariableError(fmt::format("table '{}' has no variable '{}'", table.table_id, variable),
                        {{"variable", std::string(variable)}});
  }
  return smoothed.at(*idx);
}

bool valid_table_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

std::vector<VisualizationReference> generate_references(const TimeSeriesTable& table, const IngestOptions& opts,
                                                        const Embedder& embedder, std::vector<VariableStats>* stats,
                                                        std::vector<std::vector<double>>* smoothed_out) {
  opts.validate();
  table.validate();
  struct Job {
    const Facet* facet;
    std::size_t variable;
    ChartType type;
  };
  std::vector<std::vector<Facet>> facets(table.variables.size());
  std::vector<Job> jobs;
  if (stats) stats->clear();
  if (smoothed_out) smoothed_out->clear();
  for (std::size_t v = 0; v < table.variables.size(); ++v) {
    const auto& var = table.variables[v];
    const auto smoothed = gaussian_smooth(var.values, opts.smoothing);
    // Noise is estimated before smoothing; the smoothed series has almost none.
    const PhtConfig pht = opts.pht ? *opts.pht : PhtConfig::defaults_for(var.values);
    const auto cps = pht_changepoints(smoothed, pht);
    facets[v] = generate_facets(var.name, smoothed, table.timestamps, cps, opts.facets);
    if (stats) stats->push_back({var.name, cps, facets[v].size(), facets[v].size() * opts.chart_types.size(), 0});
    if (smoothed_out) smoothed_out->push_back(smoothed);
  }
  for (std::size_t v = 0; v < facets.size(); ++v) {
    for (const auto& f : facets[v]) {
      for (auto t : opts.chart_types) jobs.push_back({&f, v, t});
    }
  }

  std::vector<VisualizationReference> refs(jobs.size());
  parallel_for(
      jobs.size(),
      [&](std::size_t i) {
        const Job& job = jobs[i];
        auto& r = refs[i];
        r.meta.ref_id = make_ref_id(table.table_id, job.variable, job.facet->span, job.type);
        r.meta.table_id = table.table_id;
        r.meta.variable = job.facet->variable;
        r.meta.span = job.facet->span;
        r.meta.start_time = job.facet->start_time;
        r.meta.end_time = job.facet->end_time;
        r.meta.chart_type = job.type;
        // Images are dropped here (150 KB each); retained ones are re-rendered.
        r.embedding = embedder.embed_image(render_chart(job.facet->values, job.type, opts.render));
      },
      opts.workers);
  return refs;
}

std::shared_ptr<TableStore> ingest_table(TimeSeriesTable table, const IngestOptions& opts,
                                         const TrendRecognizer& recognizer) {
  if (!valid_table_id(table.table_id)) {
    throw SchemaError(fmt::format("invalid table id '{}': use letters, digits, '-' or '_'", table.table_id));
  }
  auto store = std::make_shared<TableStore>();
  store->options = opts;
  std::vector<VariableStats> var_stats;
  auto refs = generate_references(table, opts, recognizer.embedder(), &var_stats, &store->smoothed);
  const PruneResult pr = prune(refs, opts.prune);

  std::vector<std::size_t> keep = pr.retained;
  std::sort(keep.begin(), keep.end());  // generation order, independent of greedy order
  std::vector<VisualizationReference> retained;
  retained.reserve(keep.size());
  for (std::size_t i : keep) retained.push_back(std::move(refs[i]));
  std::vector<std::vector<std::uint8_t>> pngs(retained.size());
  parallel_for(
      retained.size(),
      [&](std::size_t i) {
        auto& r = retained[i];
        const TrendMatch m = recognizer.recognize(r.embedding);
        r.meta.trend_category = recognizer.vocabulary().at(m.category).name;
        r.meta.trend_confidence = m.confidence;
        const auto& series = store->smoothed.at(*table.find_variable(r.meta.variable));
        const std::span<const double> slice(series.data() + r.meta.span.start, r.meta.span.length());
        pngs[i] = encode_png(render_chart(slice, r.meta.chart_type, opts.render));
      },
      opts.workers);

  for (std::size_t i = 0; i < retained.size(); ++i) {
    store->images.emplace(retained[i].meta.ref_id, std::move(pngs[i]));
    for (auto& vs : var_stats) {
      if (vs.name == retained[i].meta.variable) ++vs.refs_retained;
    }
  }
  store->index = std::make_unique<VectorIndex>(opts.mode, opts.hnsw);
  store->index->insert(retained);

  store->stats.rows = table.rows();
  store->stats.refs_generated = refs.size();
  store->stats.refs_retained = retained.size();
  store->stats.prune_threshold = opts.prune.threshold;
  store->stats.variables = std::move(var_stats);
  store->table = std::move(table);
  return store;
}

namespace {

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_table_store(const TableStore& store, const std::filesystem::path& dir) {
  nlohmann::json attributes = {{"table_id", store.table.table_id},
                               {"threshold", store.stats.prune_threshold},
                               {"counts",
                                {{"refs_generated", store.stats.refs_generated},
                                 {"refs_retained", store.stats.refs_retained}}}};
  store.index->save(dir, attributes);
  write_text(dir / "table.csv", serialize_table(store.table));
  const nlohmann::json ingest = {{"table_id", store.table.table_id},
                                 {"timestamp_name", store.table.timestamp_name},
                                 {"options", store.options.to_json()},
                                 {"stats", store.stats.to_json()}};
  write_text(dir / "ingest.json", ingest.dump(2) + "\n");
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", (dir / "images").string(), ec.message()));
  for (const auto& [id, png] : store.images) {
    write_text(dir / "images" / (id + ".png"), std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
  }
}

std::shared_ptr<TableStore> load_table_store(const std::filesystem::path& dir) {
  auto store = std::make_shared<TableStore>();
  nlohmann::json ingest;
  try {
    ingest = nlohmann::json::parse(read_text(dir / "ingest.json"));
    store->options = options_from_json(ingest.at("options"));
    store->stats = IngestStats::from_json(ingest.at("stats"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed ingest.json in '{}': {}", dir.string(), e.what()));
  }
  SchemaHint hint;
  hint.table_id = ingest.value("table_id", dir.filename().string());
  store->table = parse_table(read_text(dir / "table.csv"), hint);
  store->table.timestamp_name = ingest.value("timestamp_name", store->table.timestamp_name);
  for (const auto& v : store->table.variables) store->smoothed.push_back(gaussian_smooth(v.values, store->options.smoothing));
  store->index = VectorIndex::load(dir);
  for (const auto& m : store->index->all_meta()) {
    const auto path = dir / "images" / (m.ref_id + ".png");
    if (!std::filesystem::exists(path)) continue;
    const std::string bytes = read_text(path);
    store->images.emplace(m.ref_id, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
  }
  return store;
}

}  // namespace vistr
