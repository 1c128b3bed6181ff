#pragma once

#include <cstdint>
#include <string>

namespace pfm {

// UTC milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

constexpr TimestampMs kMinuteMs = 60'000;
constexpr TimestampMs kHourMs = 60 * kMinuteMs;
constexpr TimestampMs kDayMs = 24 * kHourMs;

/// Local wall-clock time for a UTC instant at a fixed offset.
inline TimestampMs to_local(TimestampMs utc, int tz_offset_min) {
    return utc + static_cast<TimestampMs>(tz_offset_min) * kMinuteMs;
}

/// Days since epoch of the local calendar date.
std::int64_t local_day(TimestampMs utc, int tz_offset_min);

/// Fractional local hour of day in [0, 24).
double local_hour(TimestampMs utc, int tz_offset_min);

/// 0 = Monday .. 6 = Sunday.
int local_weekday(TimestampMs utc, int tz_offset_min);

/// Minutes since local noon, in [0, 1440); keeps late-evening and
/// after-midnight bedtimes on one continuous scale.
double minutes_since_local_noon(TimestampMs utc, int tz_offset_min);

/// Parses "90m", "3h", "2d", "45" (minutes). Throws Error(InvalidArgument).
std::int64_t parse_duration_minutes(const std::string& text);

/// "YYYY-MM-DD" -> days since epoch. Throws Error(InvalidArgument).
std::int64_t parse_date_days(const std::string& text);

/// Days since epoch -> "YYYY-MM-DD".
std::string format_date(std::int64_t days);

/// "HH:MM" -> minutes after midnight.
int parse_clock_minutes(const std::string& text);

}  // namespace pfm
