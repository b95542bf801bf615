// vistr command-line front end. Exit codes: 0 ok, 1 I/O or corrupt store,
// 2 invalid input, 3 unsupported query.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "vistr/alignment.hpp"
#include "vistr/errors.hpp"
#include "vistr/image.hpp"
#include "vistr/parallel.hpp"
#include "vistr/pipeline.hpp"
#include "vistr/query.hpp"
#include "vistr/render.hpp"
#include "vistr/rng.hpp"
#include "vistr/service.hpp"
#include "vistr/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vistr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitInput = 2;
constexpr int kExitUnsupported = 3;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kFormat:
      return kExitIo;
    case ErrorCode::kUnsupportedQuery:
      return kExitUnsupported;
    default:
      return kExitInput;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()), {{"path", path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw IoError(fmt::format("cannot write '{}'", path.string()), {{"path", path.string()}});
  }
}

std::shared_ptr<const TrendRecognizer> make_recognizer(const std::string& vocab_path) {
  auto vocab = vocab_path.empty() ? TrendVocabulary::default_vocabulary() : TrendVocabulary::load(vocab_path);
  return std::make_shared<const TrendRecognizer>(std::move(vocab), std::make_shared<DescriptorEmbedder>());
}

// --db is a store root holding <table_id>/ directories, or one table
// directory itself.
fs::path table_dir(const fs::path& db, const std::string& table) {
  if (!table.empty()) {
    if (!valid_table_id(table)) throw ConfigError(fmt::format("invalid table id '{}'", table));
    return db / table;
  }
  if (fs::exists(db / "ingest.json")) return db;
  if (!fs::is_directory(db)) throw IoError(fmt::format("database '{}' does not exist", db.string()));
  std::vector<fs::path> found;
  for (const auto& e : fs::directory_iterator(db)) {
    if (e.is_directory() && fs::exists(e.path() / "ingest.json")) found.push_back(e.path());
  }
  if (found.size() == 1) return found[0];
  if (found.empty()) throw IoError(fmt::format("no ingested table under '{}'", db.string()));
  std::sort(found.begin(), found.end());
  json names = json::array();
  for (const auto& f : found) names.push_back(f.filename().string());
  throw ConfigError(fmt::format("'{}' holds several tables; pass --table", db.string()), {{"tables", names}});
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Timestamp parse_date_flag(const std::string& s) {
  const auto ts = parse_timestamp(s);
  if (!ts) throw ConfigError(fmt::format("invalid date '{}'", s));
  return *ts;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Embedding random_unit(Rng& rng) {
  std::array<double, kEmbeddingDim> raw;
  for (auto& x : raw) x = rng.normal();
  return Embedding::normalized(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vistr: chart-based pattern retrieval over time-series tables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vistr 1.0.0");
  std::string vocab_path;
  app.add_option("--vocab", vocab_path, "Trend vocabulary JSON (default: built-in)")->check(CLI::ExistingFile);

  std::function<int()> run;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Ingest a CSV table into a store");
  struct {
    std::string csv, db, table_id, chart_types = "line,bar,area", mode = "exact", ts_column, ts_format;
    double threshold = 1.0;
    std::size_t min_facet_len = 5;
    bool json = false;
  } in;
  ingest->add_option("--csv", in.csv, "Input CSV")->required();
  ingest->add_option("--db", in.db, "Store root")->envname("VISTR_DB")->required();
  ingest->add_option("--table-id", in.table_id, "Table id (default: CSV file stem)");
  ingest->add_option("--threshold", in.threshold, "Pruning threshold");
  ingest->add_option("--chart-types", in.chart_types, "Comma-separated chart types");
  ingest->add_option("--min-facet-len", in.min_facet_len, "Shortest facet in rows");
  ingest->add_option("--mode", in.mode, "Index mode")->check(CLI::IsMember({"exact", "approximate", "ann"}));
  ingest->add_option("--timestamp-column", in.ts_column, "Timestamp column name");
  ingest->add_option("--timestamp-format", in.ts_format, "strptime-style timestamp format");
  ingest->add_flag("--json", in.json, "Print the summary as JSON");
  ingest->callback([&] {
    run = [&] {
      IngestOptions opts;
      opts.prune.threshold = in.threshold;
      opts.facets.min_facet_len = in.min_facet_len;
      opts.chart_types.clear();
      for (const auto& t : split_commas(in.chart_types)) opts.chart_types.push_back(chart_type_from_string(t));
      opts.mode = index_mode_from_string(in.mode);
      opts.validate();
      SchemaHint hint;
      hint.table_id = in.table_id.empty() ? fs::path(in.csv).stem().string() : in.table_id;
      if (!in.ts_column.empty()) hint.timestamp_column = in.ts_column;
      if (!in.ts_format.empty()) hint.timestamp_format = in.ts_format;
      if (!valid_table_id(hint.table_id)) {
        throw SchemaError(fmt::format("invalid table id '{}': pass --table-id with letters, digits, '-' or '_'",
                                      hint.table_id));
      }
      auto table = parse_table(read_file(in.csv), hint);
      const auto store = ingest_table(std::move(table), opts, *make_recognizer(vocab_path));
      const fs::path dir = fs::path(in.db) / hint.table_id;
      fs::remove_all(dir);
      save_table_store(*store, dir);
      json vars = json::array();
      for (const auto& v : store->table.variables) vars.push_back(v.name);
      const json summary = {{"table_id", hint.table_id},
                            {"rows", store->stats.rows},
                            {"variables", vars},
                            {"refs_generated", store->stats.refs_generated},
                            {"refs_retained", store->stats.refs_retained},
                            {"prune_threshold", store->stats.prune_threshold}};
      if (in.json) {
        std::cout << summary.dump() << "\n";
      } else {
        const double frac = store->stats.refs_generated
                                ? static_cast<double>(store->stats.refs_retained) / store->stats.refs_generated
                                : 0.0;
        std::cout << fmt::format("ingested {}: {} rows, {} variables, refs_generated={} refs_retained={} ({:.1f}%), threshold {}\n",
                                 hint.table_id, store->stats.rows, vars.size(), store->stats.refs_generated,
                                 store->stats.refs_retained, 100.0 * frac, store->stats.prune_threshold);
      }
      return kExitOk;
    };
  });

  // query
  auto* query = app.add_subcommand("query", "Ask a question about an ingested table");
  struct {
    std::string db, table, text, sketch;
    std::size_t k = 0;
    bool json = false;
  } q;
  query->add_option("--db", q.db, "Store root or table directory")->envname("VISTR_DB")->required();
  query->add_option("--table", q.table, "Table id when the store holds several");
  query->add_option("--text", q.text, "Question text");
  query->add_option("--sketch", q.sketch, "Sketch or chart PNG")->check(CLI::ExistingFile);
  query->add_option("-k", q.k, "Number of matches (default: from the question, else 3)");
  query->add_flag("--json", q.json, "Print the answer as JSON");
  query->callback([&] {
    if (q.text.empty() && q.sketch.empty()) throw CLI::ValidationError("query", "--text or --sketch is required");
    run = [&] {
      const auto store = load_table_store(table_dir(q.db, q.table));
      QueryEngine engine(store, make_recognizer(vocab_path));
      std::optional<ChartImage> sketch;
      if (!q.sketch.empty()) {
        const std::string bytes = read_file(q.sketch);
        sketch = normalize_sketch(
            decode_png(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size())),
            store->options.render);
      }
      const Answer a = engine.ask(q.text, sketch ? &*sketch : nullptr, nullptr,
                                  q.k ? std::optional<std::size_t>(q.k) : std::nullopt);
      if (q.json) {
        std::cout << a.to_json().dump() << "\n";
        return kExitOk;
      }
      std::cout << a.text << "\n";
      for (std::size_t i = 0; i < a.result.matches.size(); ++i) {
        const Match& m = a.result.matches[i];
        std::cout << fmt::format("  {}. {}  {} to {}  similarity={:.3f}  trend={}\n", i + 1, m.ref_id,
                                 format_date(m.start_time), format_date(m.end_time), m.similarity, m.trend_category);
      }
      return kExitOk;
    };
  });

  // patterns
  auto* patterns = app.add_subcommand("patterns", "Group a variable's references by trend");
  struct {
    std::string db, table, var;
    bool json = false;
  } pg;
  patterns->add_option("--db", pg.db, "Store root or table directory")->envname("VISTR_DB")->required();
  patterns->add_option("--table", pg.table, "Table id when the store holds several");
  patterns->add_option("--var", pg.var, "Variable (default: the only one)");
  patterns->add_flag("--json", pg.json, "Print groups as JSON");
  patterns->callback([&] {
    run = [&] {
      const auto store = load_table_store(table_dir(pg.db, pg.table));
      std::string var = pg.var;
      if (var.empty()) {
        if (store->table.variables.size() != 1) throw VariableError("--var is required for tables with several variables");
        var = store->table.variables[0].name;
      }
      const auto groups = pattern_groups(*store, var);
      if (pg.json) {
        json g = json::array();
        for (const auto& x : groups) g.push_back(x.to_json());
        std::cout << json{{"table_id", store->table.table_id}, {"variable", store->table.variable(var).name}, {"groups", g}}.dump()
                  << "\n";
        return kExitOk;
      }
      for (const auto& g : groups) {
        std::cout << fmt::format("{:<20} {:>6}\n", g.category, g.count);
        for (const auto& m : g.top) {
          std::cout << fmt::format("    {}  {} to {}  confidence={:.3f}\n", m.ref_id, format_date(m.start_time),
                                   format_date(m.end_time), m.trend_confidence);
        }
      }
      return kExitOk;
    };
  });

  // align-train
  auto* train = app.add_subcommand("align-train", "Train the text/sketch projection head on triplets");
  AlignConfig acfg;
  struct {
    std::string data, out;
    bool json = false;
  } at;
  train->add_option("--data", at.data, "Triplet directory (its train/ part when present)")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", at.out, "Output head file")->required();
  train->add_option("--epochs", acfg.epochs, "Epochs");
  train->add_option("--batch-size", acfg.batch_size, "Minibatch rows");
  train->add_option("--lr", acfg.learning_rate, "Learning rate");
  train->add_option("--alpha", acfg.margin_alpha, "Hinge margin");
  train->add_option("--tau", acfg.temperature_tau, "Softmax temperature");
  train->add_option("--seed", acfg.seed, "Minibatch partition seed");
  train->add_flag("--json", at.json, "Print the loss trace as JSON");
  train->callback([&] {
    run = [&] {
      acfg.validate();
      const fs::path dir = fs::exists(fs::path(at.data) / "train") ? fs::path(at.data) / "train" : fs::path(at.data);
      const auto batch = load_alignment_batch(dir);
      const auto result = train_projection({batch}, acfg);
      result.head.save(at.out);
      if (at.json) {
        std::cout << json{{"epochs", acfg.epochs}, {"rows", batch.rows()}, {"loss_trace", result.loss_trace}, {"head", at.out}}.dump()
                  << "\n";
      } else {
        for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
          std::cout << fmt::format("epoch {:>3}  loss {:.6f}\n", e + 1, result.loss_trace[e]);
        }
        std::cout << "head written to " << at.out << "\n";
      }
      return kExitOk;
    };
  });

  // align-eval
  auto* eval = app.add_subcommand("align-eval", "Evaluate retrieval accuracy and weighted F1");
  struct {
    std::string data, head, policy = "present";
    std::size_t categories = TrendVocabulary::kCategoryCount;
    bool json = false;
  } ae;
  eval->add_option("--data", ae.data, "Triplet directory (its test/ part when present)")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--head", ae.head, "Head file (default: identity)");
  eval->add_option("--categories", ae.categories, "Category count");
  eval->add_option("--policy", ae.policy, "Categories averaged by WF")->check(CLI::IsMember({"present", "all"}));
  eval->add_flag("--json", ae.json, "Print metrics as JSON");
  eval->callback([&] {
    run = [&] {
      const fs::path dir = fs::exists(fs::path(ae.data) / "test") ? fs::path(ae.data) / "test" : fs::path(ae.data);
      const auto batch = load_alignment_batch(dir);
      const auto head = ae.head.empty() ? ProjectionHead(static_cast<std::size_t>(batch.chart.cols()))
                                        : ProjectionHead::load(ae.head);
      const auto policy = ae.policy == "all" ? AbsentCategoryPolicy::kAllCategories : AbsentCategoryPolicy::kPresentOnly;
      const Metrics m = evaluate_retrieval(batch, head, ae.categories, policy);
      if (ae.json) {
        json per = json::array();
        for (const auto& c : m.per_category) {
          per.push_back({{"category", c.category}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                         {"support", c.support}});
        }
        std::cout << json{{"acc", m.acc}, {"wf", m.wf}, {"queries", m.queries}, {"per_category", per}}.dump() << "\n";
      } else {
        std::cout << fmt::format("Acc {:.4f}  WF {:.4f}  ({} queries)\n", m.acc, m.wf, m.queries);
      }
      return kExitOk;
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Measure kNN latency and approximate recall");
  struct {
    std::size_t n = 50000, dim = kEmbeddingDim, k = 3, queries = 100, workers = 1;
    std::uint64_t seed = 42;
    std::string mode = "exact", dist = "near";
    double noise = 1.0;
    bool json = false;
  } b;
  bench->add_option("--n", b.n, "Stored vectors");
  bench->add_option("--dim", b.dim, "Dimension (must be 512)");
  bench->add_option("--mode", b.mode, "exact or ann")->check(CLI::IsMember({"exact", "ann", "approximate"}));
  bench->add_option("-k", b.k, "Neighbours per query");
  bench->add_option("--seed", b.seed, "Data seed");
  bench->add_option("--queries", b.queries, "Query count");
  bench->add_option("--query-dist", b.dist, "near: stored vector plus noise; uniform: random")
      ->check(CLI::IsMember({"near", "uniform"}));
  auto* noise_opt = bench->add_option("--query-noise", b.noise, "Noise norm relative to the vector (near)");
  bench->add_option("--workers", b.workers, "Parallel query workers");
  bench->add_flag("--json", b.json, "Print the report as JSON");
  bench->callback([&] {
    if (b.dist == "uniform" && noise_opt->count() > 0) {
      throw CLI::ValidationError("--query-noise", "only applies to --query-dist near");
    }
    if (b.dim != kEmbeddingDim) throw CLI::ValidationError("--dim", fmt::format("the index stores {}-d vectors", kEmbeddingDim));
    if (b.k == 0 || b.workers == 0) throw CLI::ValidationError("bench", "-k and --workers must be positive");
    run = [&] {
      const IndexMode mode = index_mode_from_string(b.mode);
      json report = {{"n", b.n}, {"dim", b.dim}, {"mode", std::string(to_string(mode))}, {"k", b.k},
                     {"seed", b.seed}, {"query_dist", b.dist}};
      if (b.n == 0 || b.queries == 0) {
        report["queries"] = 0;
        if (b.json) {
          std::cout << report.dump() << "\n";
        } else {
          std::cout << "empty benchmark: nothing to query\n";
        }
        return kExitOk;
      }
      Rng rng(b.seed);
      VectorIndex index(mode);
      std::vector<Embedding> sample;  // query sources
      const auto t0 = std::chrono::steady_clock::now();
      constexpr std::size_t kChunk = 5000;
      for (std::size_t start = 0; start < b.n; start += kChunk) {
        std::vector<VisualizationReference> refs(std::min(kChunk, b.n - start));
        for (std::size_t i = 0; i < refs.size(); ++i) {
          auto& r = refs[i];
          r.meta.ref_id = fmt::format("bench.{}", start + i);
          r.meta.table_id = "bench";
          r.meta.variable = "v";
          r.embedding = random_unit(rng);
        }
        index.insert(refs);
      }
      const double build_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      Rng qrng(b.seed ^ 0x5bd1e995ULL);
      std::vector<Embedding> queries(b.queries);
      for (auto& qv : queries) {
        if (b.dist == "uniform") {
          qv = random_unit(qrng);
        } else {
          const auto src = index.vector(qrng.below(b.n));
          const Embedding noise = random_unit(qrng);
          std::array<double, kEmbeddingDim> raw;
          for (std::size_t j = 0; j < kEmbeddingDim; ++j) raw[j] = src[j] + b.noise * noise.values[j];
          qv = Embedding::normalized(raw);
        }
      }
      std::vector<double> latency_ms(queries.size());
      std::vector<std::string> top(queries.size());
      parallel_for(
          queries.size(),
          [&](std::size_t i) {
            const auto s = std::chrono::steady_clock::now();
            const auto hits = index.query_knn(queries[i], b.k);
            latency_ms[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s).count();
            top[i] = hits.at(0).ref_id;
          },
          b.workers);
      report["queries"] = queries.size();
      report["build_s"] = build_s;
      report["p50_ms"] = percentile(latency_ms, 0.50);
      report["p95_ms"] = percentile(latency_ms, 0.95);
      report["mean_ms"] = std::accumulate(latency_ms.begin(), latency_ms.end(), 0.0) / latency_ms.size();
      if (mode == IndexMode::kApproximate) {
        std::size_t agree = 0;
        for (std::size_t i = 0; i < queries.size(); ++i) {
          agree += index.query_knn(queries[i], 1, {}, true).at(0).ref_id == top[i];
        }
        report["recall_at_1"] = static_cast<double>(agree) / static_cast<double>(queries.size());
      }
      if (b.json) {
        std::cout << report.dump() << "\n";
      } else {
        std::cout << fmt::format("{} mode, n={} dim={} k={}: build {:.2f} s, p50 {:.3f} ms, p95 {:.3f} ms", report["mode"].get<std::string>(),
                                 b.n, b.dim, b.k, build_s, report["p50_ms"].get<double>(), report["p95_ms"].get<double>());
        if (report.contains("recall_at_1")) std::cout << fmt::format(", recall@1 {:.3f}", report["recall_at_1"].get<double>());
        std::cout << "\n";
      }
      return kExitOk;
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  ApiConfig api;
  std::string root;
  std::size_t body_mib = 16;
  serve->add_option("--db", root, "Store root")->envname("VISTR_DB")->required();
  serve->add_option("--host", api.host, "Bind address");
  serve->add_option("--port", api.port, "Port (0 picks a free one)");
  serve->add_option("--body-limit-mib", body_mib, "Request body limit in MiB");
  serve->add_option("--cors", api.cors_origins, "Allowed CORS origins ('*' for any)");
  serve->callback([&] {
    run = [&] {
      api.store_root = root;
      api.body_limit = body_mib * 1024 * 1024;
      Service service(api, make_recognizer(vocab_path));
      const int port = service.bind();
      std::cerr << fmt::format("vistr serving {} tables on http://{}:{}\n", service.table_ids().size(), api.host, port);
      service.listen();
      return kExitOk;
    };
  });

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate deterministic synthetic data");
  struct {
    std::string kind = "random-walk", out, manifest, start, plants, table_id;
    std::size_t rows = 1000, vars = 1, per_category = 30, categories = TrendVocabulary::kCategoryCount;
    std::uint64_t seed = 42;
    double test_fraction = 0.2;
    bool json = false;
  } g;
  gen->add_option("--kind", g.kind, "random-walk, planted-patterns or triplets")
      ->check(CLI::IsMember({"random-walk", "planted-patterns", "triplets"}));
  auto* rows_opt = gen->add_option("--rows", g.rows, "Rows (planted-patterns: minimum, 0 = automatic)");
  auto* vars_opt = gen->add_option("--vars", g.vars, "Variables (random-walk)");
  gen->add_option("--seed", g.seed, "Seed");
  gen->add_option("--out", g.out, "Output CSV, or directory for triplets ('-' for stdout)")->required();
  auto* manifest_opt = gen->add_option("--manifest", g.manifest, "Manifest path (planted-patterns)");
  auto* start_opt = gen->add_option("--start-date", g.start, "First timestamp (YYYY-MM-DD)");
  auto* plants_opt = gen->add_option("--plants", g.plants, "category:count list, e.g. two-peak:10,valley:2");
  gen->add_option("--table-id", g.table_id, "Table id recorded in manifests");
  auto* per_opt = gen->add_option("--per-category", g.per_category, "Triplets per category");
  auto* cat_opt = gen->add_option("--categories", g.categories, "Triplet categories");
  auto* frac_opt = gen->add_option("--test-fraction", g.test_fraction, "Triplet test share");
  gen->add_flag("--json", g.json, "Print a JSON summary");
  gen->callback([&] {
    const bool planted = g.kind == "planted-patterns";
    const bool triplets = g.kind == "triplets";
    if (!planted && (manifest_opt->count() || plants_opt->count())) {
      throw CLI::ValidationError("gen-synth", "--manifest and --plants need --kind planted-patterns");
    }
    if (!triplets && (per_opt->count() || cat_opt->count() || frac_opt->count())) {
      throw CLI::ValidationError("gen-synth", "--per-category, --categories and --test-fraction need --kind triplets");
    }
    if (triplets && (rows_opt->count() || vars_opt->count() || start_opt->count())) {
      throw CLI::ValidationError("gen-synth", "--rows, --vars and --start-date do not apply to triplets");
    }
    if (planted && vars_opt->count()) throw CLI::ValidationError("gen-synth", "planted-patterns has one variable");
    if (g.kind == "random-walk" && g.rows < 2) throw CLI::ValidationError("--rows", "at least 2 rows are required");
    if (triplets && g.out == "-") throw CLI::ValidationError("--out", "triplets need an output directory");
    run = [&, planted, triplets] {
      json summary = {{"kind", g.kind}, {"seed", g.seed}, {"out", g.out}};
      auto emit_csv = [&](const std::string& csv) {
        if (g.out == "-") {
          std::cout << csv;
        } else {
          write_file(g.out, csv);
        }
      };
      if (triplets) {
        const auto task = make_rotated_task(g.categories, g.per_category, g.test_fraction, g.seed);
        save_alignment_batch(task.train, fs::path(g.out) / "train");
        save_alignment_batch(task.test, fs::path(g.out) / "test");
        summary["train_rows"] = task.train.rows();
        summary["test_rows"] = task.test.rows();
      } else if (planted) {
        PlantedOptions po;
        po.seed = g.seed;
        po.rows = rows_opt->count() ? g.rows : 0;
        if (!g.start.empty()) po.start = parse_date_flag(g.start);
        if (!g.table_id.empty()) po.table_id = g.table_id;
        if (!g.plants.empty()) {
          po.plants.clear();
          for (const auto& item : split_commas(g.plants)) {
            const auto colon = item.rfind(':');
            if (colon == std::string::npos) throw ConfigError(fmt::format("--plants item '{}' needs category:count", item));
            po.plants.emplace_back(item.substr(0, colon), std::stoul(item.substr(colon + 1)));
          }
        }
        const auto p = planted_patterns_table(po, vocab_path.empty() ? TrendVocabulary::default_vocabulary()
                                                                     : TrendVocabulary::load(vocab_path));
        emit_csv(serialize_table(p.table));
        std::string manifest = g.manifest;
        if (manifest.empty() && g.out != "-") {
          manifest = (fs::path(g.out).parent_path() / (fs::path(g.out).stem().string() + ".manifest.json")).string();
        }
        if (!manifest.empty()) write_file(manifest, p.manifest().dump(2) + "\n");
        summary["rows"] = p.table.rows();
        summary["vars"] = 1;
        summary["windows"] = p.windows.size();
        summary["manifest"] = manifest.empty() ? json(nullptr) : json(manifest);
      } else {
        RandomWalkOptions ro;
        ro.rows = g.rows;
        ro.vars = g.vars;
        ro.seed = g.seed;
        if (!g.start.empty()) ro.start = parse_date_flag(g.start);
        if (!g.table_id.empty()) ro.table_id = g.table_id;
        const auto t = random_walk_table(ro);
        emit_csv(serialize_table(t));
        summary["rows"] = t.rows();
        summary["vars"] = t.variables.size();
      }
      if (g.out != "-") {
        if (g.json) {
          std::cout << summary.dump() << "\n";
        } else {
          std::cout << fmt::format("wrote {} ({})\n", g.out, g.kind);
        }
      }
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << error_name(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  }
  try {
    return run();
  } catch (const Error& e) {
    std::cerr << "error: " << error_name(e.code()) << ": " << e.what() << "\n";
    if (!e.detail().empty()) std::cerr << "detail: " << e.detail().dump() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
