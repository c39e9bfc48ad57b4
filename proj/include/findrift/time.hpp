#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>

namespace findrift {

// UTC instant formatted as ISO-8601 with millisecond precision,
// e.g. "2026-08-25T14:03:59.123Z".
inline std::string format_utc_iso8601(
    std::chrono::system_clock::time_point tp) {
    using namespace std::chrono;
    auto ms = duration_cast<milliseconds>(tp.time_since_epoch()) % 1000;
    std::time_t t = system_clock::to_time_t(tp);
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                  tm_utc.tm_year + 1900, tm_utc.tm_mon + 1, tm_utc.tm_mday,
                  tm_utc.tm_hour, tm_utc.tm_min, tm_utc.tm_sec,
                  static_cast<int>(ms.count()));
    return buf;
}

inline std::string utc_now_iso8601() {
    return format_utc_iso8601(std::chrono::system_clock::now());
}

}  // namespace findrift
