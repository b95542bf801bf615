#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vistr {

using Timestamp = std::chrono::sys_seconds;

struct Variable {
  std::string name;
  std::vector<double> values;

  bool operator==(const Variable&) const = default;
};

/// Timestamped numeric columns, one value per timestamp per variable.
///
/// Invariants (checked by validate()): timestamps strictly increasing,
/// every variable has rows() values, at least one variable and two rows,
/// and all values finite.
struct TimeSeriesTable {
  std::string table_id;
  std::string timestamp_name = "Date";
  std::vector<Timestamp> timestamps;
  std::vector<Variable> variables;

  std::size_t rows() const { return timestamps.size(); }

  /// Case-insensitive lookup; returns the variable's column index.
  std::optional<std::size_t> find_variable(std::string_view name) const;
  const Variable& variable(std::string_view name) const;  // throws VariableError

  void validate() const;  // throws SchemaError

  bool operator==(const TimeSeriesTable&) const = default;
};

/// Ingestion options. `timestamp_format` is a strptime-style pattern
/// ("%d/%m/%Y"); when unset, ISO-8601 dates and datetimes are accepted.
struct SchemaHint {
  std::string table_id = "table";
  std::optional<std::string> timestamp_column;
  std::optional<std::string> timestamp_format;
};

/// Parses a UTF-8 CSV with a header row. The timestamp column is the first
/// column unless hinted; the remaining columns must be numeric. Rows are
/// sorted by timestamp.
///
/// Throws ParseError(row, col) for non-numeric or missing cells (row is the
/// 1-based line number, col the 1-based column) and SchemaError for
/// duplicate timestamps, fewer than two rows, or no numeric columns.
TimeSeriesTable parse_table(std::string_view csv, const SchemaHint& hint = {});

/// Writes the table back as CSV; values use the shortest round-trip form,
/// so parse_table(serialize_table(t)) reproduces t.
std::string serialize_table(const TimeSeriesTable& table);

std::optional<Timestamp> parse_timestamp(std::string_view text,
                                         const std::optional<std::string>& format = std::nullopt);

/// "2020-03-01" when the instant is midnight, else "2020-03-01T09:30:00".
std::string format_timestamp(Timestamp ts);
std::string format_date(Timestamp ts);   // "2020-03-01"
std::string format_short(Timestamp ts);  // "8-Feb-21"

}  // namespace vistr
