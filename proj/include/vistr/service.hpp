#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vistr/errors.hpp"
#include "vistr/pipeline.hpp"
#include "vistr/vocabulary.hpp"

namespace vistr {

struct ApiConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path store_root = "vistr-db";
  std::size_t body_limit = 16 * 1024 * 1024;
  std::vector<std::string> cors_origins;  // "*" allows any origin
  IngestOptions ingest;

  /// Creates store_root if needed and checks it is writable; throws
  /// ConfigError or IoError.
  void validate() const;
};

/// HTTP JSON front end over a directory of ingested tables
/// (store_root/<table_id>/). Tables found there are loaded at start-up.
/// Readers work on immutable snapshots; each table has one writer lock, so
/// queries never see a half-ingested table.
///
///   POST /api/tables                  multipart "file" (CSV) + options
///   GET  /api/tables                  ingested tables
///   GET  /api/tables/{id}             ingestion summary
///   POST /api/tables/{id}/query       {text?, image_base64?, k?}
///   GET  /api/tables/{id}/patterns    ?var=V
///   GET  /api/tables/{id}/series      ?vars=A,B&max_points=N
///   GET  /api/refs/{ref_id}/image     PNG bytes
///   GET  /api/health
///
/// Errors use {code, message, detail}.
class Service {
 public:
  explicit Service(ApiConfig config, std::shared_ptr<const TrendRecognizer> recognizer = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket; returns the bound port. Throws IoError.
  int bind();
  /// Serves on the bound socket until stop(); blocks.
  void listen();
  /// bind() + listen() on a background thread; returns the port.
  int start();
  void stop();

  std::vector<std::string> table_ids() const;
  std::shared_ptr<const TableStore> table(std::string_view id) const;  // nullptr when unknown

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status for an engine error: 400 for bad input, 404 for unknown
/// tables, references or empty results, 422 for well-formed but
/// unanswerable queries, 500 otherwise.
int http_status(ErrorCode code);

nlohmann::json error_body(const Error& e);

/// Largest-triangle-three-buckets over several aligned series: one shared
/// bucket layout, and in each bucket the row maximizing the summed
/// triangle areas of all series (each scaled by its range). Returns
/// increasing row indices, always including the first and last row.
std::vector<std::size_t> lttb_indices(const std::vector<std::span<const double>>& series, std::size_t max_points);

/// Standard base64 with optional padding and whitespace, and an optional
/// "data:...;base64," prefix. Throws FormatError.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace vistr
