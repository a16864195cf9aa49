#pragma once

#include <cmath>
#include <utility>

#include "ersm/dsp.hpp"
#include "ersm/errors.hpp"
#include "ersm/station.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

// Angular frequency of the Earth's rotation, degrees per second.
constexpr double omega_earth_deg_per_s = 0.004178;

struct AlignmentResult {
    TimeSeries aligned_ers;    // time-aligned extended-station series
    TimeSeries truncated_lrs;  // local series on the same timestamps
    double offset_s = 0.0;
    double delta_lon_deg = 0.0;
};

// Longitude difference (wrapped into (-180, 180]) and the corresponding
// rotation time offset.
inline std::pair<double, double> longitude_offset(const StationRecord& ers,
                                                  const StationRecord& lrs) {
    double delta = wrap_longitude(ers.longitude_deg - lrs.longitude_deg);
    return {delta, delta / omega_earth_deg_per_s};
}

// Split the extended-station series, delay only its low band by the rotation
// offset, and recombine with the unshifted high band. An eastward extended
// station (delta > 0) sees solar features earlier, so its low band is delayed
// by a positive offset. The result is shorter than the input by the samples
// the shift pushed outside the span.
inline TimeSeries normalize_series(const TimeSeries& ers_dv,
                                   const StationRecord& ers,
                                   const StationRecord& lrs,
                                   double cutoff_cph = 0.33, int order = 4) {
    double offset_s = longitude_offset(ers, lrs).second;
    if (offset_s == 0.0) return ers_dv;
    auto [low, high] = complementary_split(ers_dv, cutoff_cph, order);
    TimeSeries shifted_low = shift_series(low, offset_s);
    auto [combined, hi_c] = intersect_span(shifted_low, high);
    for (size_t i = 0; i < combined.size(); ++i)
        combined.values[i] += hi_c.values[i];
    return combined;
}

// Normalize the extended-station series and truncate both series to the
// common timestamps.
inline AlignmentResult align(const TimeSeries& ers_dv, const TimeSeries& lrs_dv,
                             const StationRecord& ers, const StationRecord& lrs,
                             double cutoff_cph = 0.33, int order = 4) {
    auto [delta_lon, offset_s] = longitude_offset(ers, lrs);
    TimeSeries combined = normalize_series(ers_dv, ers, lrs, cutoff_cph, order);
    auto [aligned, truncated] = intersect_span(combined, lrs_dv);
    AlignmentResult res;
    res.aligned_ers = std::move(aligned);
    res.truncated_lrs = std::move(truncated);
    res.offset_s = offset_s;
    res.delta_lon_deg = delta_lon;
    return res;
}

} // namespace ersm
