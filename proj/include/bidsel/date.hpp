#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace bidsel {

// Calendar date with day-resolution arithmetic. No time zones, no DST:
// every day has exactly 24 hours as far as this library is concerned.
struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const Date&) const = default;

  // Days since 1970-01-01 (negative before).
  std::int64_t serial() const;
  static Date from_serial(std::int64_t days);

  Date plus_days(int n) const { return from_serial(serial() + n); }

  // 0 = Monday .. 6 = Sunday.
  int weekday() const;

  // Strict ISO-8601 YYYY-MM-DD; throws ValidationError otherwise.
  static Date parse(std::string_view iso);
  std::string to_string() const;

  static bool is_valid(int y, int m, int d);
};

}  // namespace bidsel
