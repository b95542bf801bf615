#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace vistr {

enum class ErrorCode {
  kParse,
  kSchema,
  kConfig,
  kRender,
  kEmptySketch,
  kUnknownTrend,
  kAmbiguousTrend,
  kDivergence,
  kLabel,
  kStore,
  kEmptyResult,
  kFormat,
  kUnsupportedQuery,
  kVariable,
  kPeriod,
  kNoMatch,
  kIo,
};

/// Stable name used in API error bodies ("ParseError", "SchemaError", ...).
std::string_view error_name(ErrorCode code);

/// Base of every error the engine raises. `detail` carries structured
/// context (row/col, candidate lists) for the HTTP and CLI layers.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nlohmann::json::object());

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t col, const std::string& message);
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

#define VISTR_DEFINE_ERROR(Name, Code)                                                   \
  class Name : public Error {                                                           \
   public:                                                                              \
    explicit Name(const std::string& message, nlohmann::json detail = nlohmann::json::object()) \
        : Error(ErrorCode::Code, message, std::move(detail)) {}                         \
  }

VISTR_DEFINE_ERROR(SchemaError, kSchema);
VISTR_DEFINE_ERROR(ConfigError, kConfig);
VISTR_DEFINE_ERROR(RenderError, kRender);
VISTR_DEFINE_ERROR(EmptySketchError, kEmptySketch);
VISTR_DEFINE_ERROR(UnknownTrendError, kUnknownTrend);
VISTR_DEFINE_ERROR(AmbiguousTrendError, kAmbiguousTrend);
VISTR_DEFINE_ERROR(LabelError, kLabel);
VISTR_DEFINE_ERROR(StoreError, kStore);
VISTR_DEFINE_ERROR(EmptyResult, kEmptyResult);
VISTR_DEFINE_ERROR(FormatError, kFormat);
VISTR_DEFINE_ERROR(UnsupportedQueryError, kUnsupportedQuery);
VISTR_DEFINE_ERROR(VariableError, kVariable);
VISTR_DEFINE_ERROR(PeriodError, kPeriod);
VISTR_DEFINE_ERROR(NoMatchError, kNoMatch);
VISTR_DEFINE_ERROR(IoError, kIo);

#undef VISTR_DEFINE_ERROR

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& message);
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace vistr
