#include "bidsel/date.hpp"

#include <array>
#include <charconv>

#include "bidsel/error.hpp"

namespace bidsel {

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
  if (m == 2 && leap(y)) return 29;
  return kDays[m - 1];
}

}  // namespace

bool Date::is_valid(int y, int m, int d) {
  return m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
}

// Proleptic Gregorian civil <-> serial conversion (era/day-of-era form).
std::int64_t Date::serial() const {
  std::int64_t y = year - (month <= 2);
  std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  std::int64_t yoe = y - era * 400;
  std::int64_t doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
  std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

Date Date::from_serial(std::int64_t days) {
  std::int64_t z = days + 719468;
  std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  std::int64_t doe = z - era * 146097;
  std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = yoe + era * 400;
  std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  std::int64_t mp = (5 * doy + 2) / 153;
  Date out;
  out.day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  out.month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  out.year = static_cast<int>(y + (out.month <= 2));
  return out;
}

int Date::weekday() const {
  std::int64_t s = serial();
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  return static_cast<int>(((s % 7) + 7 + 3) % 7);
}

Date Date::parse(std::string_view iso) {
  auto fail = [&] {
    throw ValidationError("invalid date '" + std::string(iso) +
                          "' (expected YYYY-MM-DD)");
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') fail();
  auto read = [&](std::string_view s, int& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail();
  };
  Date d;
  read(iso.substr(0, 4), d.year);
  read(iso.substr(5, 2), d.month);
  read(iso.substr(8, 2), d.day);
  if (!is_valid(d.year, d.month, d.day)) fail();
  return d;
}

std::string Date::to_string() const {
  char buf[11];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

}  // namespace bidsel
