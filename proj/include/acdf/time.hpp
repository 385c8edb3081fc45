#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace acdf {

using TimePoint = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kHour{3600};

/// Parses "YYYY-MM-DDTHH:MM:SSZ" (the trailing Z is required).
TimePoint parse_utc(const std::string& text);
std::string format_utc(TimePoint t);

/// count consecutive hourly stamps beginning at start.
std::vector<TimePoint> hourly_times(TimePoint start, std::size_t count);

/// True when times are strictly increasing with exactly one hour between
/// neighbours.
bool is_hourly(const std::vector<TimePoint>& times);

}  // namespace acdf
