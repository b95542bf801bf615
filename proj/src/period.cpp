#include "vistr/period.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

#include <fmt/format.h>

#include "vistr/errors.hpp"

namespace vistr {

namespace {

using namespace std::chrono;

constexpr std::array<std::string_view, 12> kMonthNames = {"January", "February", "March",     "April",
                                                          "May",     "June",     "July",      "August",
                                                          "September", "October", "November", "December"};

constexpr seconds kDayEnd{86399};

// One side of a range. Month and year are optional independently; a
// date endpoint carries exact bounds instead.
struct Endpoint {
  std::optional<unsigned> month;
  std::optional<int> year;
  std::optional<Timestamp> from;  // set for ISO dates
  std::optional<Timestamp> to;
  std::string text;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<int> parse_year(std::string_view w) {
  if (w.size() != 4 || !std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return std::nullopt;
  }
  return std::stoi(std::string(w));
}

[[noreturn]] void bad_period(std::string_view phrase, std::string_view why) {
  throw PeriodError(fmt::format("cannot parse period '{}': {}", phrase, why),
                    {{"period", std::string(phrase)},
                     {"supported", {"2021-03-01", "2021-03-01 to 2021-03-15", "March 2021", "March to October 2017",
                                    "March", "2017"}}});
}

Endpoint parse_endpoint(const std::vector<std::string>& ws, std::string_view phrase) {
  Endpoint e;
  for (const auto& w : ws) e.text += (e.text.empty() ? "" : " ") + w;
  if (ws.size() == 1) {
    if (auto y = parse_year(ws[0])) {
      e.year = y;
      return e;
    }
    if (auto m = month_from_name(ws[0])) {
      e.month = m;
      return e;
    }
    if (ws[0].find('-') != std::string::npos) {
      const auto ts = parse_timestamp(ws[0]);
      if (!ts) bad_period(phrase, fmt::format("'{}' is not a valid date", ws[0]));
      e.from = *ts;
      // A bare date covers the whole day; a datetime is a single instant.
      e.to = ws[0].find('T') == std::string::npos ? *ts + kDayEnd : *ts;
      return e;
    }
  } else if (ws.size() == 2) {
    const auto m = month_from_name(ws[0]);
    const auto y = parse_year(ws[1]);
    if (m && y) {
      e.month = m;
      e.year = y;
      return e;
    }
  }
  bad_period(phrase, fmt::format("unrecognized date '{}'", e.text));
}

Timestamp month_start(int y, unsigned m) { return sys_days{year{y} / month{m} / day{1}}; }
Timestamp month_end(int y, unsigned m) { return Timestamp{sys_days{year{y} / month{m} / last}} + kDayEnd; }
Timestamp year_start(int y) { return sys_days{year{y} / January / day{1}}; }
Timestamp year_end(int y) { return Timestamp{sys_days{year{y} / December / day{31}}} + kDayEnd; }

std::string month_label(unsigned m) { return std::string(kMonthNames[m - 1]); }

// Year of the first table row in month m, if any.
std::optional<int> first_year_with_month(const TimeSeriesTable& table, unsigned m) {
  for (auto ts : table.timestamps) {
    const year_month_day ymd{floor<days>(ts)};
    if (static_cast<unsigned>(ymd.month()) == m) return static_cast<int>(ymd.year());
  }
  return std::nullopt;
}

int table_first_year(const TimeSeriesTable& table) {
  return static_cast<int>(year_month_day{floor<days>(table.timestamps.front())}.year());
}

}  // namespace

std::optional<unsigned> month_from_name(std::string_view word) {
  const std::string w = lower(word);
  if (w == "sept") return 9u;
  for (unsigned i = 0; i < kMonthNames.size(); ++i) {
    const std::string full = lower(kMonthNames[i]);
    if (w == full || w == full.substr(0, 3)) return i + 1;
  }
  return std::nullopt;
}

nlohmann::json Period::to_json() const {
  return {{"from", format_timestamp(from)}, {"to", format_timestamp(to)}, {"label", label}};
}

Period Period::from_json(const nlohmann::json& j) {
  const auto f = parse_timestamp(j.at("from").get<std::string>());
  const auto t = parse_timestamp(j.at("to").get<std::string>());
  if (!f || !t) throw PeriodError("period bounds must be ISO timestamps");
  return {*f, *t, j.value("label", "")};
}

Period parse_period(std::string_view phrase, const TimeSeriesTable& table) {
  if (table.timestamps.empty()) throw PeriodError("table has no rows");
  auto ws = words(phrase);
  while (!ws.empty() && !ws.back().empty() && std::ispunct(static_cast<unsigned char>(ws.back().back()))) {
    ws.back().pop_back();
    if (ws.back().empty()) ws.pop_back();
  }
  // Leading fillers: "from", "between", "the period of", "the".
  for (bool again = true; again && !ws.empty();) {
    const std::string w0 = lower(ws.front());
    again = w0 == "from" || w0 == "between" || w0 == "the" || w0 == "period" || w0 == "of";
    if (again) ws.erase(ws.begin());
  }
  if (ws.empty()) bad_period(phrase, "empty period");

  std::vector<std::string> left;
  std::vector<std::string> right;
  bool range = false;
  for (const auto& w : ws) {
    const std::string lw = lower(w);
    if (!range && (lw == "to" || lw == "and" || lw == "until" || lw == "through" || lw == "-")) {
      range = true;
      continue;
    }
    (range ? right : left).push_back(w);
  }
  if (left.empty() || (range && right.empty())) bad_period(phrase, "incomplete range");

  Period p;
  Endpoint a = parse_endpoint(left, phrase);
  if (!range) {
    if (a.from) {
      p = {*a.from, *a.to, a.text};
    } else if (a.month && a.year) {
      p = {month_start(*a.year, *a.month), month_end(*a.year, *a.month), fmt::format("{} {}", month_label(*a.month), *a.year)};
    } else if (a.month) {
      const auto y = first_year_with_month(table, *a.month);
      if (!y) {
        throw PeriodError(fmt::format("the table has no rows in {}", month_label(*a.month)),
                          {{"period", std::string(phrase)}});
      }
      p = {month_start(*y, *a.month), month_end(*y, *a.month), month_label(*a.month)};
    } else {
      p = {year_start(*a.year), year_end(*a.year), std::to_string(*a.year)};
    }
  } else {
    Endpoint b = parse_endpoint(right, phrase);
    if (a.from || b.from) {
      if (!a.from || !b.from) bad_period(phrase, "mix dates with dates, months with months");
      p = {*a.from, *b.to, fmt::format("{} to {}", a.text, b.text)};
    } else if (a.month && b.month) {
      // "March to October 2017": the left side borrows the right's year,
      // stepping back one year when the months wrap.
      int yb = 0;
      if (b.year) {
        yb = *b.year;
      } else {
        const auto y = first_year_with_month(table, *a.month);
        yb = y.value_or(table_first_year(table)) + (*b.month < *a.month ? 1 : 0);
      }
      const int ya = a.year ? *a.year : (*b.month < *a.month ? yb - 1 : yb);
      p.from = month_start(ya, *a.month);
      p.to = month_end(yb, *b.month);
      if (a.year) {
        p.label = fmt::format("{} {} to {}", month_label(*a.month), ya, month_label(*b.month));
        if (b.year) p.label += fmt::format(" {}", yb);
      } else {
        p.label = fmt::format("{} to {}", month_label(*a.month), month_label(*b.month));
        if (b.year) p.label += fmt::format(" {}", yb);
      }
    } else if (a.year && b.year && !a.month && !b.month) {
      p = {year_start(*a.year), year_end(*b.year), fmt::format("{} to {}", *a.year, *b.year)};
    } else {
      bad_period(phrase, "unsupported range form");
    }
    if (p.from > p.to) bad_period(phrase, "range ends before it starts");
  }

  const Timestamp lo = table.timestamps.front();
  const Timestamp hi = table.timestamps.back();
  if (p.to < lo || p.from > hi) {
    throw PeriodError(fmt::format("period '{}' is outside the table ({} to {})", p.label, format_date(lo), format_date(hi)),
                      {{"period", std::string(phrase)}, {"table_from", format_timestamp(lo)}, {"table_to", format_timestamp(hi)}});
  }
  p.from = std::max(p.from, lo);
  p.to = std::min(p.to, hi);
  return p;
}

RowSpan period_rows(const Period& period, const TimeSeriesTable& table) {
  const auto& ts = table.timestamps;
  const auto first = std::lower_bound(ts.begin(), ts.end(), period.from);
  const auto past = std::upper_bound(ts.begin(), ts.end(), period.to);
  if (past - first < 2) {
    throw PeriodError(fmt::format("period '{}' covers fewer than two rows", period.label),
                      {{"period", period.to_json()}});
  }
  return {static_cast<std::size_t>(first - ts.begin()), static_cast<std::size_t>(past - ts.begin()) - 1};
}

}  // namespace vistr
