#include "acdf/time.hpp"

#include <cstdio>

#include "acdf/errors.hpp"

namespace acdf {

namespace {

// Proleptic Gregorian day count relative to 1970-01-01.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, long long& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<long long>(yoe) + era * 400 + (m <= 2);
}

}  // namespace

TimePoint parse_utc(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char z = 0;
  int consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c%n", &y, &mo, &d, &h, &mi, &s, &z,
                  &consumed) != 7 ||
      z != 'Z' || static_cast<std::size_t>(consumed) != text.size() || mo < 1 || mo > 12 ||
      d < 1 || d > 31 || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) {
    throw FormatError("invalid UTC timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  }
  const long long days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return TimePoint{std::chrono::seconds{days * 86400 + h * 3600 + mi * 60 + s}};
}

std::string format_utc(TimePoint t) {
  const long long total = t.time_since_epoch().count();
  long long days = total / 86400;
  long long rem = total % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  long long y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", y, m, d, rem / 3600,
                (rem % 3600) / 60, rem % 60);
  return buf;
}

std::vector<TimePoint> hourly_times(TimePoint start, std::size_t count) {
  std::vector<TimePoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(start + kHour * static_cast<long>(i));
  return out;
}

bool is_hourly(const std::vector<TimePoint>& times) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] - times[i - 1] != kHour) return false;
  }
  return true;
}

}  // namespace acdf
