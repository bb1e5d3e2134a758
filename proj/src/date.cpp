#include "ramp/date.hpp"

#include <charconv>
#include <cstdio>

#include "ramp/error.hpp"

namespace ramp {

namespace {

int to_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw FormatError("bad date '" + std::string(whole) + "'");
  return v;
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
  std::chrono::year_month_day ymd{std::chrono::year(year), std::chrono::month(month),
                                  std::chrono::day(day)};
  if (!ymd.ok()) throw FormatError("invalid calendar date");
  days_ = std::chrono::sys_days(ymd);
}

Date Date::parse(std::string_view iso) {
  auto a = iso.find('-');
  auto b = a == std::string_view::npos ? a : iso.find('-', a + 1);
  if (b == std::string_view::npos) throw FormatError("bad date '" + std::string(iso) + "'");
  int y = to_int(iso.substr(0, a), iso);
  int m = to_int(iso.substr(a + 1, b - a - 1), iso);
  int d = to_int(iso.substr(b + 1), iso);
  if (m < 1 || d < 1) throw FormatError("bad date '" + std::string(iso) + "'");
  return Date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

int Date::year() const { return int(std::chrono::year_month_day(days_).year()); }
unsigned Date::month() const { return unsigned(std::chrono::year_month_day(days_).month()); }
unsigned Date::day() const { return unsigned(std::chrono::year_month_day(days_).day()); }

std::string Date::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

DateRange DateRange::parse(std::string_view spec) {
  auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw FormatError("date range must be FROM:TO, got '" + std::string(spec) + "'");
  DateRange r{Date::parse(spec.substr(0, colon)), Date::parse(spec.substr(colon + 1))};
  if (r.last < r.first) throw FormatError("date range ends before it starts");
  return r;
}

}  // namespace ramp
