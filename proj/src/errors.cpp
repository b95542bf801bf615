#include "vistr/errors.hpp"

#include <fmt/format.h>

namespace vistr {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kRender: return "RenderError";
    case ErrorCode::kEmptySketch: return "EmptySketchError";
    case ErrorCode::kUnknownTrend: return "UnknownTrendError";
    case ErrorCode::kAmbiguousTrend: return "AmbiguousTrendError";
    case ErrorCode::kDivergence: return "DivergenceError";
    case ErrorCode::kLabel: return "LabelError";
    case ErrorCode::kStore: return "StoreError";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kUnsupportedQuery: return "UnsupportedQueryError";
    case ErrorCode::kVariable: return "VariableError";
    case ErrorCode::kPeriod: return "PeriodError";
    case ErrorCode::kNoMatch: return "NoMatchError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Error";
}

Error::Error(ErrorCode code, const std::string& message, nlohmann::json detail)
    : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

ParseError::ParseError(std::size_t row, std::size_t col, const std::string& message)
    : Error(ErrorCode::kParse, fmt::format("row {}, column {}: {}", row, col, message),
            nlohmann::json{{"row", row}, {"col", col}}),
      row_(row),
      col_(col) {}

DivergenceError::DivergenceError(std::size_t epoch, const std::string& message)
    : Error(ErrorCode::kDivergence, fmt::format("epoch {}: {}", epoch, message),
            nlohmann::json{{"epoch", epoch}}),
      epoch_(epoch) {}

}  // namespace vistr
