#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace ramp {

// Calendar day. Thin wrapper over sys_days so arithmetic is plain integer math.
class Date {
 public:
  Date() = default;
  Date(int year, unsigned month, unsigned day);
  explicit Date(std::chrono::sys_days d) : days_(d) {}

  static Date parse(std::string_view iso);  // YYYY-MM-DD

  int year() const;
  unsigned month() const;
  unsigned day() const;

  std::string str() const;
  std::chrono::sys_days sys() const { return days_; }

  Date operator+(long n) const { return Date(days_ + std::chrono::days(n)); }
  long operator-(const Date& o) const { return (days_ - o.days_).count(); }
  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

struct DateRange {
  Date first;
  Date last;  // inclusive

  bool contains(const Date& d) const { return first <= d && d <= last; }
  static DateRange parse(std::string_view spec);  // "YYYY-MM-DD:YYYY-MM-DD"
};

}  // namespace ramp
