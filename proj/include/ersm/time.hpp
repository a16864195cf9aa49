#pragma once

#include <cmath>
#include <cstdint>

namespace ersm {

struct CivilTime {
    int year;
    int month;
    int day;
    int hour;
    int minute;
    double second;
};

// Days from 1970-01-01 for a proleptic Gregorian date.
inline int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

inline void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int64_t doe = z - era * 146097;
    const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yr = yoe + era * 400;
    const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int64_t mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

inline double civil_to_epoch(int year, int month, int day,
                             int hour = 0, int minute = 0, double second = 0.0) {
    return static_cast<double>(days_from_civil(year, month, day)) * 86400.0 +
           hour * 3600.0 + minute * 60.0 + second;
}

inline CivilTime epoch_to_civil(double epoch_s) {
    int64_t days = static_cast<int64_t>(std::floor(epoch_s / 86400.0));
    double sod = epoch_s - static_cast<double>(days) * 86400.0;
    CivilTime ct{};
    civil_from_days(days, ct.year, ct.month, ct.day);
    ct.hour = static_cast<int>(sod / 3600.0);
    sod -= ct.hour * 3600.0;
    ct.minute = static_cast<int>(sod / 60.0);
    ct.second = sod - ct.minute * 60.0;
    return ct;
}

inline int day_of_year(int year, int month, int day) {
    return static_cast<int>(days_from_civil(year, month, day) -
                            days_from_civil(year, 1, 1)) + 1;
}

// Fractional year with exact year boundaries (leap-year aware).
inline double decimal_year(double epoch_s) {
    CivilTime ct = epoch_to_civil(epoch_s);
    double y0 = civil_to_epoch(ct.year, 1, 1);
    double y1 = civil_to_epoch(ct.year + 1, 1, 1);
    return ct.year + (epoch_s - y0) / (y1 - y0);
}

// Epoch of the UTC midnight at or before epoch_s.
inline double floor_utc_day(double epoch_s) {
    return std::floor(epoch_s / 86400.0) * 86400.0;
}

} // namespace ersm
