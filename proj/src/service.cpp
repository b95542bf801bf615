#include "vistr/service.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "vistr/embedding.hpp"
#include "vistr/image.hpp"
#include "vistr/query.hpp"
#include "vistr/render.hpp"

namespace vistr {

namespace fs = std::filesystem;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kSchema:
    case ErrorCode::kConfig:
    case ErrorCode::kRender:
    case ErrorCode::kFormat:
    case ErrorCode::kVariable:
    case ErrorCode::kPeriod:
    case ErrorCode::kLabel:
      return 400;
    case ErrorCode::kStore:
    case ErrorCode::kEmptyResult:
    case ErrorCode::kNoMatch:
      return 404;
    case ErrorCode::kUnsupportedQuery:
    case ErrorCode::kEmptySketch:
    case ErrorCode::kUnknownTrend:
    case ErrorCode::kAmbiguousTrend:
      return 422;
    case ErrorCode::kDivergence:
    case ErrorCode::kIo:
      return 500;
  }
  return 500;
}

nlohmann::json error_body(const Error& e) {
  return {{"code", std::string(error_name(e.code()))}, {"message", e.what()}, {"detail", e.detail()}};
}

void ApiConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError(fmt::format("invalid port {}", port));
  if (body_limit == 0) throw ConfigError("body limit must be positive");
  ingest.validate();
  std::error_code ec;
  fs::create_directories(store_root, ec);
  if (ec || !fs::is_directory(store_root)) {
    throw IoError(fmt::format("store root '{}' is not a usable directory", store_root.string()));
  }
  const fs::path probe = store_root / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError(fmt::format("store root '{}' is not writable", store_root.string()));
  }
  fs::remove(probe, ec);
}

std::vector<std::size_t> lttb_indices(const std::vector<std::span<const double>>& series, std::size_t max_points) {
  if (series.empty()) return {};
  const std::size_t n = series[0].size();
  for (const auto& s : series) {
    if (s.size() != n) throw ConfigError("series must have equal length");
  }
  std::vector<std::size_t> out;
  if (max_points >= n || n <= 2) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  if (max_points < 3) throw ConfigError("max_points must be at least 3");

  std::vector<double> scale(series.size(), 1.0);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto [lo, hi] = std::minmax_element(series[k].begin(), series[k].end());
    if (*hi > *lo) scale[k] = 1.0 / (*hi - *lo);
  }
  // Interior rows 1..n-2 split into max_points-2 buckets.
  const double width = static_cast<double>(n - 2) / static_cast<double>(max_points - 2);
  auto bucket_begin = [&](std::size_t b) { return 1 + static_cast<std::size_t>(std::floor(b * width)); };
  out.push_back(0);
  std::size_t a = 0;
  std::vector<double> cy(series.size());
  for (std::size_t b = 0; b + 2 < max_points; ++b) {
    const std::size_t lo = bucket_begin(b);
    const std::size_t hi = std::min(bucket_begin(b + 1), n - 1);
    // Third vertex: mean of the next bucket (the last row for the final one).
    const std::size_t nlo = hi;
    const std::size_t nhi = b + 3 < max_points ? std::min(bucket_begin(b + 2), n - 1) : n;
    const double cx = (static_cast<double>(nlo) + static_cast<double>(nhi - 1)) / 2.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
      double sum = 0.0;
      for (std::size_t j = nlo; j < nhi; ++j) sum += series[k][j];
      cy[k] = scale[k] * sum / static_cast<double>(nhi - nlo);
    }
    std::size_t best = lo;
    double best_area = -1.0;
    for (std::size_t i = lo; i < hi; ++i) {
      double area = 0.0;
      const double ax = static_cast<double>(a);
      const double bx = static_cast<double>(i);
      for (std::size_t k = 0; k < series.size(); ++k) {
        const double ay = series[k][a] * scale[k];
        const double by = series[k][i] * scale[k];
        area += std::abs((ax - cx) * (by - ay) - (ax - bx) * (cy[k] - ay));
      }
      if (area > best_area) {
        best_area = area;
        best = i;
      }
    }
    out.push_back(best);
    a = best;
  }
  out.push_back(n - 1);
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.substr(0, 5) == "data:") {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw FormatError("malformed data URL");
    text.remove_prefix(comma + 1);
  }
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  bool padding = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (c == '=') {
      padding = true;
      continue;
    }
    const int v = value(c);
    if (v < 0 || padding) throw FormatError("invalid base64 input");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  if (bits >= 6) throw FormatError("truncated base64 input");
  return out;
}

struct Service::Impl {
  ApiConfig config;
  std::shared_ptr<const TrendRecognizer> recognizer;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  mutable std::shared_mutex tables_mutex;
  std::map<std::string, std::shared_ptr<const TableStore>> tables;

  std::mutex writers_mutex;
  std::map<std::string, std::shared_ptr<std::mutex>> writers;  // per-table ingestion locks

  std::mutex context_mutex;
  std::map<std::string, QueryContext> contexts;

  std::atomic<std::uint64_t> staging_counter{0};

  std::shared_ptr<const TableStore> snapshot(const std::string& id) const {
    std::shared_lock lock(tables_mutex);
    const auto it = tables.find(id);
    return it == tables.end() ? nullptr : it->second;
  }

  std::shared_ptr<const TableStore> require(const std::string& id) const {
    auto s = snapshot(id);
    if (!s) throw StoreError(fmt::format("unknown table '{}'", id), {{"table_id", id}});
    return s;
  }

  std::shared_ptr<std::mutex> writer_lock(const std::string& id) {
    std::lock_guard lock(writers_mutex);
    auto& m = writers[id];
    if (!m) m = std::make_shared<std::mutex>();
    return m;
  }

  void load_existing() {
    for (const auto& entry : fs::directory_iterator(config.store_root)) {
      if (!entry.is_directory() || !fs::exists(entry.path() / "ingest.json")) continue;
      const std::string id = entry.path().filename().string();
      if (!valid_table_id(id)) continue;
      tables[id] = load_table_store(entry.path());
    }
  }

  void route();
  void ingest(const httplib::Request& req, httplib::Response& res);
  void query(const std::string& id, const httplib::Request& req, httplib::Response& res);
  void patterns(const std::string& id, const httplib::Request& req, httplib::Response& res) const;
  void series(const std::string& id, const httplib::Request& req, httplib::Response& res) const;
  void image(const std::string& ref_id, httplib::Response& res) const;
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message,
                const nlohmann::json& detail = nlohmann::json::object()) {
  send_json(res, status, {{"code", std::string(code)}, {"message", std::string(message)}, {"detail", detail}});
}

// Multipart field, or query parameter for raw-body uploads.
std::optional<std::string> field(const httplib::Request& req, const std::string& name) {
  if (req.has_file(name)) return req.get_file_value(name).content;
  if (req.has_param(name)) return req.get_param_value(name);
  return std::nullopt;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_number(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("option '{}' must be a number, got '{}'", name, text), {{"option", name}});
}

std::string stem_id(const std::string& filename) {
  std::string stem = fs::path(filename).stem().string();
  for (auto& c : stem) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return stem.empty() ? "table" : stem;
}

}  // namespace

void Service::Impl::ingest(const httplib::Request& req, httplib::Response& res) {
  std::string csv;
  std::string id;
  if (req.is_multipart_form_data()) {
    const char* key = req.has_file("file") ? "file" : (req.has_file("csv") ? "csv" : nullptr);
    if (!key) throw SchemaError("multipart upload needs a 'file' part with the CSV");
    const auto& f = req.get_file_value(key);
    csv = f.content;
    id = stem_id(f.filename);
  } else {
    csv = req.body;
    id = "table";
  }
  if (auto v = field(req, "table_id")) id = *v;
  if (!valid_table_id(id)) {
    throw SchemaError(fmt::format("invalid table id '{}': use letters, digits, '-' or '_'", id), {{"table_id", id}});
  }

  IngestOptions opts = config.ingest;
  if (auto v = field(req, "threshold")) opts.prune.threshold = parse_number("threshold", *v);
  if (auto v = field(req, "min_facet_len")) {
    opts.facets.min_facet_len = static_cast<std::size_t>(parse_number("min_facet_len", *v));
  }
  if (auto v = field(req, "chart_types")) {
    opts.chart_types.clear();
    for (const auto& t : split_list(*v)) opts.chart_types.push_back(chart_type_from_string(t));
  }
  if (auto v = field(req, "mode")) opts.mode = index_mode_from_string(*v);
  opts.validate();

  SchemaHint hint;
  hint.table_id = id;
  if (auto v = field(req, "timestamp_column")) hint.timestamp_column = *v;
  if (auto v = field(req, "timestamp_format")) hint.timestamp_format = *v;
  TimeSeriesTable table = parse_table(csv, hint);

  auto lock = writer_lock(id);
  std::lock_guard writer(*lock);
  std::shared_ptr<const TableStore> store = ingest_table(std::move(table), opts, *recognizer);

  // Stage on disk, then swap directory and snapshot.
  const fs::path final_dir = config.store_root / id;
  const fs::path staging = config.store_root / fmt::format(".staging-{}-{}", id, staging_counter++);
  save_table_store(*store, staging);
  std::error_code ec;
  fs::remove_all(final_dir, ec);
  fs::rename(staging, final_dir, ec);
  if (ec) throw IoError(fmt::format("cannot publish table '{}': {}", id, ec.message()));
  {
    std::unique_lock wl(tables_mutex);
    tables[id] = store;
  }
  {
    std::lock_guard cl(context_mutex);
    contexts.erase(id);
  }

  std::vector<std::string> vars;
  for (const auto& v : store->table.variables) vars.push_back(v.name);
  send_json(res, 201,
            {{"table_id", id},
             {"rows", store->stats.rows},
             {"variables", vars},
             {"refs_generated", store->stats.refs_generated},
             {"refs_retained", store->stats.refs_retained},
             {"prune_threshold", store->stats.prune_threshold}});
}

void Service::Impl::query(const std::string& id, const httplib::Request& req, httplib::Response& res) {
  const auto store = require(id);
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("request body is not JSON: {}", e.what()));
  }
  if (!body.is_object()) throw SchemaError("request body must be a JSON object");
  const std::string text = body.contains("text") && body["text"].is_string() ? body["text"].get<std::string>() : "";
  std::optional<ChartImage> sketch;
  if (body.contains("image_base64") && body["image_base64"].is_string()) {
    const auto png = base64_decode(body["image_base64"].get<std::string>());
    sketch = normalize_sketch(decode_png(png), store->options.render);
  }
  if (text.empty() && !sketch) throw SchemaError("query needs 'text' or 'image_base64'");
  std::optional<std::size_t> k;
  if (body.contains("k")) {
    if (!body["k"].is_number_integer() || body["k"].get<long long>() < 1) throw ConfigError("'k' must be a positive integer");
    k = body["k"].get<std::size_t>();
  }

  QueryEngine engine(store, recognizer);
  QueryContext ctx;
  {
    std::lock_guard cl(context_mutex);
    ctx = contexts[id];
  }
  const Answer answer = engine.ask(text, sketch ? &*sketch : nullptr, &ctx, k);
  {
    std::lock_guard cl(context_mutex);
    contexts[id] = ctx;
  }
  send_json(res, 200, answer.to_json());
}

void Service::Impl::patterns(const std::string& id, const httplib::Request& req, httplib::Response& res) const {
  const auto store = require(id);
  std::string var;
  if (req.has_param("var")) {
    var = req.get_param_value("var");
  } else if (store->table.variables.size() == 1) {
    var = store->table.variables[0].name;
  } else {
    throw VariableError("'var' is required for tables with several variables");
  }
  const auto groups = pattern_groups(*store, var);
  nlohmann::json g = nlohmann::json::array();
  for (const auto& x : groups) g.push_back(x.to_json());
  send_json(res, 200, {{"table_id", id}, {"variable", store->table.variable(var).name}, {"groups", g}});
}

void Service::Impl::series(const std::string& id, const httplib::Request& req, httplib::Response& res) const {
  const auto store = require(id);
  const TimeSeriesTable& t = store->table;
  std::vector<std::size_t> cols;
  if (req.has_param("vars")) {
    for (const auto& name : split_list(req.get_param_value("vars"))) {
      const auto idx = t.find_variable(name);
      if (!idx) throw VariableError(fmt::format("unknown variable '{}'", name), {{"variable", name}});
      cols.push_back(*idx);
    }
  } else {
    for (std::size_t i = 0; i < t.variables.size(); ++i) cols.push_back(i);
  }
  std::size_t max_points = 2000;
  if (req.has_param("max_points")) {
    const double v = parse_number("max_points", req.get_param_value("max_points"));
    if (v < 3 || v > 2000) throw ConfigError("max_points must be in [3, 2000]");
    max_points = static_cast<std::size_t>(v);
  }
  std::vector<std::span<const double>> spans;
  for (auto c : cols) spans.emplace_back(t.variables[c].values);
  const auto idx = lttb_indices(spans, max_points);
  nlohmann::json ts = nlohmann::json::array();
  for (auto i : idx) ts.push_back(format_timestamp(t.timestamps[i]));
  nlohmann::json values = nlohmann::json::object();
  for (auto c : cols) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto i : idx) arr.push_back(t.variables[c].values[i]);
    values[t.variables[c].name] = std::move(arr);
  }
  send_json(res, 200,
            {{"table_id", id},
             {"rows", t.rows()},
             {"downsampled", idx.size() < t.rows()},
             {"indices", idx},
             {"timestamps", ts},
             {"series", values}});
}

void Service::Impl::image(const std::string& ref_id, httplib::Response& res) const {
  const std::string table_id = ref_id.substr(0, ref_id.find('.'));
  const auto store = snapshot(table_id);
  if (!store || !store->images.contains(ref_id)) {
    throw StoreError(fmt::format("unknown reference '{}'", ref_id), {{"ref_id", ref_id}});
  }
  const auto& png = store->images.at(ref_id);
  res.status = 200;
  res.set_content(std::string(reinterpret_cast<const char*>(png.data()), png.size()), "image/png");
}

void Service::Impl::route() {
  server.set_payload_max_length(config.body_limit);

  auto guarded = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_json(res, http_status(e.code()), error_body(e));
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  };

  server.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    const std::string origin = req.get_header_value("Origin");
    if (origin.empty()) return;
    const auto& allowed = config.cors_origins;
    if (std::find(allowed.begin(), allowed.end(), "*") != allowed.end() ||
        std::find(allowed.begin(), allowed.end(), origin) != allowed.end()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  // Statuses set by the library itself (404 route, 413 payload) get the
  // common error body.
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 413) {
      send_error(res, 413, "PayloadTooLarge", "request body exceeds the size limit");
    } else if (res.status == 404) {
      send_error(res, 404, "NotFound", "no such endpoint");
    } else {
      send_error(res, res.status, "HttpError", httplib::status_message(res.status));
    }
    return httplib::Server::HandlerResponse::Handled;
  });

  server.Get("/api/health", guarded([](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, {{"status", "ok"}});
             }));
  server.Post("/api/tables", guarded([this](const httplib::Request& req, httplib::Response& res) { ingest(req, res); }));
  server.Get("/api/tables", guarded([this](const httplib::Request&, httplib::Response& res) {
               nlohmann::json ids = nlohmann::json::array();
               std::shared_lock lock(tables_mutex);
               for (const auto& [id, _] : tables) ids.push_back(id);
               send_json(res, 200, {{"tables", ids}});
             }));
  server.Get(R"(/api/tables/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto store = require(req.matches[1]);
               nlohmann::json j = store->stats.to_json();
               j["table_id"] = store->table.table_id;
               j["options"] = store->options.to_json();
               send_json(res, 200, j);
             }));
  server.Post(R"(/api/tables/([A-Za-z0-9_-]+)/query)",
              guarded([this](const httplib::Request& req, httplib::Response& res) { query(req.matches[1], req, res); }));
  server.Get(R"(/api/tables/([A-Za-z0-9_-]+)/patterns)",
             guarded([this](const httplib::Request& req, httplib::Response& res) { patterns(req.matches[1], req, res); }));
  server.Get(R"(/api/tables/([A-Za-z0-9_-]+)/series)",
             guarded([this](const httplib::Request& req, httplib::Response& res) { series(req.matches[1], req, res); }));
  server.Get(R"(/api/refs/([^/]+)/image)",
             guarded([this](const httplib::Request& req, httplib::Response& res) { image(req.matches[1], res); }));
}

Service::Service(ApiConfig config, std::shared_ptr<const TrendRecognizer> recognizer) : impl_(std::make_unique<Impl>()) {
  config.validate();
  impl_->config = std::move(config);
  impl_->recognizer = recognizer ? std::move(recognizer)
                                 : std::make_shared<const TrendRecognizer>(TrendVocabulary::default_vocabulary(),
                                                                           std::make_shared<DescriptorEmbedder>());
  impl_->load_existing();
  impl_->route();
}

Service::~Service() { stop(); }

int Service::bind() {
  const auto& c = impl_->config;
  impl_->port = c.port == 0 ? impl_->server.bind_to_any_port(c.host) : (impl_->server.bind_to_port(c.host, c.port) ? c.port : -1);
  if (impl_->port < 0) throw IoError(fmt::format("cannot bind {}:{}", c.host, c.port));
  return impl_->port;
}

void Service::listen() {
  if (impl_->port < 0) bind();
  impl_->server.listen_after_bind();
}

int Service::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::vector<std::string> Service::table_ids() const {
  std::shared_lock lock(impl_->tables_mutex);
  std::vector<std::string> ids;
  for (const auto& [id, _] : impl_->tables) ids.push_back(id);
  return ids;
}

std::shared_ptr<const TableStore> Service::table(std::string_view id) const { return impl_->snapshot(std::string(id)); }

}  // namespace vistr
