#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vistr/facet.hpp"
#include "vistr/table.hpp"

namespace vistr {

/// A closed time window [from, to] plus the wording used in answers.
struct Period {
  Timestamp from;
  Timestamp to;
  std::string label;  // "March", "March to October 2017", "2021-03-01 to 2021-03-15"

  nlohmann::json to_json() const;
  static Period from_json(const nlohmann::json& j);
  bool operator==(const Period&) const = default;
};

/// Parses a period phrase against a table:
///   "2021-03-01", "2021-03-01 to 2021-03-15" (also "from A to B",
///   "between A and B"), "March 2021", "Mar 2021 to May 2021",
///   "March to October 2017", "March" (the first March in the table),
///   "2017".
/// The result is clamped to the table's time range. Throws PeriodError
/// when the phrase is not one of these forms, names an impossible date or
/// does not overlap the table.
Period parse_period(std::string_view phrase, const TimeSeriesTable& table);

/// Rows whose timestamps fall inside the period. Throws PeriodError when
/// fewer than two rows do.
RowSpan period_rows(const Period& period, const TimeSeriesTable& table);

/// 1-based month for an English month name or three-letter abbreviation
/// ("sept" is accepted), case-insensitive.
std::optional<unsigned> month_from_name(std::string_view word);

}  // namespace vistr
