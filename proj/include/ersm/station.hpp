#pragma once

#include <cmath>
#include <map>
#include <string>

#include "ersm/errors.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

// Wrap a longitude in degrees into (-180, 180].
inline double wrap_longitude(double lon_deg) {
    double w = std::fmod(lon_deg, 360.0);
    if (w > 180.0) w -= 360.0;
    if (w <= -180.0) w += 360.0;
    return w;
}

struct StationRecord {
    std::string iaga_code;
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;   // stored in (-180, 180]
    double elevation_m = 0.0;
    std::string reported;         // channel orientation, e.g. "XYZF"
    std::map<std::string, TimeSeries> components;

    const TimeSeries& component(const std::string& name) const {
        auto it = components.find(name);
        if (it == components.end())
            throw InvalidArgument("station " + iaga_code + ": no component " + name);
        return it->second;
    }
    bool has_component(const std::string& name) const {
        return components.count(name) != 0;
    }
};

// Great-circle distance on a spherical Earth, radius 6371.0 km.
inline double separation_km(const StationRecord& a, const StationRecord& b) {
    const double rad = M_PI / 180.0;
    double lat1 = a.latitude_deg * rad, lat2 = b.latitude_deg * rad;
    double dlat = (b.latitude_deg - a.latitude_deg) * rad;
    double dlon = (b.longitude_deg - a.longitude_deg) * rad;
    double s = std::sin(dlat / 2.0), t = std::sin(dlon / 2.0);
    double h = s * s + std::cos(lat1) * std::cos(lat2) * t * t;
    return 2.0 * 6371.0 * std::asin(std::min(1.0, std::sqrt(h)));
}

} // namespace ersm
