#include "pfm/time.hpp"

#include "pfm/error.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>

namespace pfm {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

std::int64_t local_day(TimestampMs utc, int tz_offset_min) {
    return floor_div(to_local(utc, tz_offset_min), kDayMs);
}

double local_hour(TimestampMs utc, int tz_offset_min) {
    const TimestampMs local = to_local(utc, tz_offset_min);
    const TimestampMs in_day = local - floor_div(local, kDayMs) * kDayMs;
    return static_cast<double>(in_day) / static_cast<double>(kHourMs);
}

int local_weekday(TimestampMs utc, int tz_offset_min) {
    // 1970-01-01 was a Thursday (index 3 with Monday = 0).
    const std::int64_t day = local_day(utc, tz_offset_min);
    std::int64_t w = (day + 3) % 7;
    if (w < 0) w += 7;
    return static_cast<int>(w);
}

double minutes_since_local_noon(TimestampMs utc, int tz_offset_min) {
    double minutes = local_hour(utc, tz_offset_min) * 60.0 - 720.0;
    if (minutes < 0) minutes += 1440.0;
    return minutes;
}

std::int64_t parse_duration_minutes(const std::string& text) {
    if (text.empty()) fail(ErrorCode::InvalidArgument, "empty duration");
    std::size_t pos = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == 0) fail(ErrorCode::InvalidArgument, "bad duration '" + text + "'");
    const std::int64_t value = std::strtoll(text.substr(0, pos).c_str(), nullptr, 10);
    const std::string unit = text.substr(pos);
    if (unit.empty() || unit == "m" || unit == "min") return value;
    if (unit == "h") return value * 60;
    if (unit == "d") return value * 1440;
    fail(ErrorCode::InvalidArgument, "bad duration unit in '" + text + "'");
}

// Howard Hinnant's civil-calendar conversions.
std::int64_t parse_date_days(const std::string& text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 ||
        d > 31) {
        fail(ErrorCode::InvalidArgument, "bad date '" + text + "'");
    }
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::string format_date(std::int64_t days) {
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const auto doe = static_cast<unsigned>(days - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
    return buf;
}

int parse_clock_minutes(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size()) {
        fail(ErrorCode::InvalidArgument, "bad clock time '" + text + "'");
    }
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i != colon && !std::isdigit(static_cast<unsigned char>(text[i]))) {
            fail(ErrorCode::InvalidArgument, "bad clock time '" + text + "'");
        }
    }
    const int h = std::atoi(text.substr(0, colon).c_str());
    const int m = std::atoi(text.substr(colon + 1).c_str());
    if (h > 23 || m > 59) fail(ErrorCode::InvalidArgument, "bad clock time '" + text + "'");
    return h * 60 + m;
}

}  // namespace pfm
