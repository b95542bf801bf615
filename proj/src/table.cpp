#include "vistr/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits CSV text into records of fields (RFC 4180 quoting). Records keep
// their 1-based source line number for error reporting.
struct Record {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<Record> split_csv(std::string_view text) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  std::vector<Record> records;
  Record current{1, {}};
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    current.fields.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = current.fields.size() == 1 && trim(current.fields[0]).empty();
    if (!blank) records.push_back(std::move(current));
    current = Record{line + 1, {}};
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
      ++line;
    } else if (c == '\r') {
      // tolerated before \n
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError(line, current.fields.size() + 1, "unterminated quoted field");
  if (!field.empty() || !current.fields.empty()) end_record();
  return records;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::optional<Timestamp> make_timestamp(int y, int mo, int d, int h, int mi, int s) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{s};
}

std::optional<Timestamp> parse_iso(std::string_view text) {
  text = trim(text);
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y, mo, d, h = 0, mi = 0, s = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) || !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  std::string_view rest = text.substr(10);
  if (!rest.empty()) {
    if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
    rest.remove_prefix(1);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
    if (rest.size() != 5 && rest.size() != 8) return std::nullopt;
    if (rest[2] != ':' || !parse_int(rest.substr(0, 2), h) || !parse_int(rest.substr(3, 2), mi)) return std::nullopt;
    if (rest.size() == 8 && (rest[5] != ':' || !parse_int(rest.substr(6, 2), s))) return std::nullopt;
  }
  return make_timestamp(y, mo, d, h, mi, s);
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::optional<std::size_t> TimeSeriesTable::find_variable(std::string_view name) const {
  const std::string key = lower(trim(name));
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (lower(variables[i].name) == key) return i;
  }
  return std::nullopt;
}

const Variable& TimeSeriesTable::variable(std::string_view name) const {
  if (auto idx = find_variable(name)) return variables[*idx];
  nlohmann::json known = nlohmann::json::array();
  for (const auto& v : variables) known.push_back(v.name);
  throw VariableError(fmt::format("unknown variable '{}'", name), {{"variable", name}, {"known", known}});
}

void TimeSeriesTable::validate() const {
  if (variables.empty()) throw SchemaError("table has no numeric variables");
  if (rows() < 2) throw SchemaError(fmt::format("table has {} rows; at least 2 required", rows()));
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1]) {
      throw SchemaError(fmt::format("timestamps not strictly increasing at row {}", i),
                        {{"row", i}, {"timestamp", format_timestamp(timestamps[i])}});
    }
  }
  for (const auto& v : variables) {
    if (v.values.size() != rows()) {
      throw SchemaError(fmt::format("variable '{}' has {} values for {} rows", v.name, v.values.size(), rows()));
    }
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      if (!std::isfinite(v.values[i])) {
        throw SchemaError(fmt::format("variable '{}' has a non-finite value at row {}", v.name, i));
      }
    }
  }
}

std::optional<Timestamp> parse_timestamp(std::string_view text, const std::optional<std::string>& format) {
  if (!format) return parse_iso(text);
  std::tm tm{};
  std::istringstream in{std::string(trim(text))};
  in >> std::get_time(&tm, format->c_str());
  if (in.fail()) return std::nullopt;
  in >> std::ws;
  if (!in.eof()) return std::nullopt;
  return make_timestamp(tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
}

std::string format_date(Timestamp ts) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(ts)};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day_start = floor<days>(ts);
  if (ts == day_start) return format_date(ts);
  const hh_mm_ss hms{ts - day_start};
  return fmt::format("{}T{:02d}:{:02d}:{:02d}", format_date(ts), hms.hours().count(), hms.minutes().count(),
                     hms.seconds().count());
}

std::string format_short(Timestamp ts) {
  using namespace std::chrono;
  static constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  const year_month_day ymd{floor<days>(ts)};
  return fmt::format("{}-{}-{:02d}", static_cast<unsigned>(ymd.day()), kMonths[static_cast<unsigned>(ymd.month()) - 1],
                     static_cast<int>(ymd.year()) % 100);
}

TimeSeriesTable parse_table(std::string_view csv, const SchemaHint& hint) {
  const auto records = split_csv(csv);
  if (records.empty()) throw SchemaError("empty CSV: header row required");
  const auto& header = records.front().fields;

  std::size_t ts_col = 0;
  if (hint.timestamp_column) {
    const std::string want = lower(trim(*hint.timestamp_column));
    auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) { return lower(trim(h)) == want; });
    if (it == header.end()) throw SchemaError(fmt::format("timestamp column '{}' not in header", *hint.timestamp_column));
    ts_col = static_cast<std::size_t>(it - header.begin());
  }

  TimeSeriesTable table;
  table.table_id = hint.table_id;
  table.timestamp_name = std::string(trim(header[ts_col]));
  std::vector<std::size_t> value_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == ts_col) continue;
    value_cols.push_back(c);
    table.variables.push_back({std::string(trim(header[c])), {}});
  }
  if (table.variables.empty()) throw SchemaError("CSV has no value columns");
  for (std::size_t i = 0; i < table.variables.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (lower(table.variables[i].name) == lower(table.variables[j].name)) {
        throw SchemaError(fmt::format("duplicate column name '{}'", table.variables[i].name));
      }
    }
  }

  struct Row {
    Timestamp ts;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw ParseError(rec.line, std::min(rec.fields.size(), header.size()) + 1,
                       fmt::format("expected {} fields, found {}", header.size(), rec.fields.size()));
    }
    auto ts = parse_timestamp(rec.fields[ts_col], hint.timestamp_format);
    if (!ts) throw ParseError(rec.line, ts_col + 1, fmt::format("cannot parse timestamp '{}'", rec.fields[ts_col]));
    Row row{*ts, {}};
    row.values.reserve(value_cols.size());
    for (std::size_t c : value_cols) {
      auto v = parse_number(rec.fields[c]);
      if (!v) throw ParseError(rec.line, c + 1, fmt::format("non-numeric value '{}'", rec.fields[c]));
      row.values.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ts == rows[i - 1].ts) {
      throw SchemaError(fmt::format("duplicate timestamp {}", format_timestamp(rows[i].ts)),
                        {{"timestamp", format_timestamp(rows[i].ts)}});
    }
  }
  table.timestamps.reserve(rows.size());
  for (auto& v : table.variables) v.values.reserve(rows.size());
  for (const auto& row : rows) {
    table.timestamps.push_back(row.ts);
    for (std::size_t i = 0; i < row.values.size(); ++i) table.variables[i].values.push_back(row.values[i]);
  }
  table.validate();
  return table;
}

std::string serialize_table(const TimeSeriesTable& table) {
  std::string out = csv_quote(table.timestamp_name);
  for (const auto& v : table.variables) {
    out.push_back(',');
    out += csv_quote(v.name);
  }
  out.push_back('\n');
  char buf[64];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out += format_timestamp(table.timestamps[r]);
    for (const auto& v : table.variables) {
      out.push_back(',');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v.values[r]);
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace vistr
