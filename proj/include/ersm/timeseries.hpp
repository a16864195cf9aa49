#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ersm/errors.hpp"
#include "ersm/format.hpp"

namespace ersm {

// Uniformly sampled scalar series. Timestamps are exactly
// start_epoch + i * period_s; gap_mask records which samples were absent in
// the source (values at gap positions are filled by cleaning, but the mask
// keeps provenance).
struct TimeSeries {
    double start_epoch = 0.0;
    double period_s = 60.0;
    std::vector<double> values;
    std::vector<uint8_t> gap_mask;

    TimeSeries() = default;
    TimeSeries(double start, double period, std::vector<double> vals)
        : start_epoch(start), period_s(period), values(std::move(vals)),
          gap_mask(values.size(), 0) {}
    TimeSeries(double start, double period, std::vector<double> vals,
               std::vector<uint8_t> gaps)
        : start_epoch(start), period_s(period), values(std::move(vals)),
          gap_mask(std::move(gaps)) {}

    size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
    double epoch_at(size_t i) const { return start_epoch + static_cast<double>(i) * period_s; }
    double end_epoch() const {
        return values.empty() ? start_epoch : epoch_at(values.size() - 1);
    }
    bool is_gap(size_t i) const { return gap_mask.size() > i && gap_mask[i] != 0; }

    // Index of the sample at epoch_s, or -1 if epoch_s is off-grid or outside.
    ptrdiff_t index_of(double epoch_s) const {
        double fi = (epoch_s - start_epoch) / period_s;
        double ri = std::round(fi);
        if (std::abs(fi - ri) > 1e-6) return -1;
        if (ri < 0 || ri >= static_cast<double>(values.size())) return -1;
        return static_cast<ptrdiff_t>(ri);
    }

    // Linear interpolation at an arbitrary time inside the span.
    double interpolate(double epoch_s) const {
        if (values.empty()) throw EmptySeries("interpolate: empty series");
        double fi = (epoch_s - start_epoch) / period_s;
        double last = static_cast<double>(values.size() - 1);
        if (fi > -1e-6 && fi < 0.0) fi = 0.0;
        if (fi > last && fi < last + 1e-6) fi = last;
        if (fi < 0.0 || fi > last)
            throw OutOfRange(strformat("interpolate: %.3f outside span", epoch_s));
        size_t i0 = static_cast<size_t>(fi);
        if (i0 >= values.size() - 1) return values.back();
        double frac = fi - static_cast<double>(i0);
        return values[i0] * (1.0 - frac) + values[i0 + 1] * frac;
    }

    TimeSeries slice(size_t first, size_t count) const {
        TimeSeries out;
        out.start_epoch = epoch_at(first);
        out.period_s = period_s;
        out.values.assign(values.begin() + first, values.begin() + first + count);
        if (gap_mask.size() == values.size())
            out.gap_mask.assign(gap_mask.begin() + first, gap_mask.begin() + first + count);
        else
            out.gap_mask.assign(count, 0);
        return out;
    }

    // Slice covering [t0, t1): samples with t0 <= epoch < t1.
    TimeSeries slice_time(double t0, double t1) const {
        if (values.empty()) return TimeSeries(t0, period_s, {});
        double fi0 = std::ceil((t0 - start_epoch) / period_s - 1e-9);
        double fi1 = std::ceil((t1 - start_epoch) / period_s - 1e-9);
        ptrdiff_t i0 = std::max<ptrdiff_t>(0, static_cast<ptrdiff_t>(fi0));
        ptrdiff_t i1 = std::min<ptrdiff_t>(static_cast<ptrdiff_t>(values.size()),
                                           static_cast<ptrdiff_t>(fi1));
        if (i1 <= i0) return TimeSeries(t0, period_s, {});
        return slice(static_cast<size_t>(i0), static_cast<size_t>(i1 - i0));
    }
};

inline bool same_grid(const TimeSeries& a, const TimeSeries& b, double tol = 1e-6) {
    return a.size() == b.size() &&
           std::abs(a.start_epoch - b.start_epoch) <= tol &&
           std::abs(a.period_s - b.period_s) <= tol;
}

inline void require_same_grid(const TimeSeries& a, const TimeSeries& b,
                              const char* what) {
    if (!same_grid(a, b))
        throw Misaligned(strformat(
            "%s: series grids differ (start %.3f vs %.3f, period %.3f vs %.3f, "
            "len %zu vs %zu)",
            what, a.start_epoch, b.start_epoch, a.period_s, b.period_s,
            a.size(), b.size()));
}

// Restrict both series to their common timestamp span (same grid phase
// required; throws NoOverlap when the spans do not intersect).
inline std::pair<TimeSeries, TimeSeries> intersect_span(const TimeSeries& a,
                                                        const TimeSeries& b) {
    if (std::abs(a.period_s - b.period_s) > 1e-9)
        throw Misaligned("intersect_span: sample periods differ");
    double phase = std::remainder(b.start_epoch - a.start_epoch, a.period_s);
    if (std::abs(phase) > 1e-6)
        throw Misaligned("intersect_span: grids are phase-shifted");
    double t0 = std::max(a.start_epoch, b.start_epoch);
    double t1 = std::min(a.end_epoch(), b.end_epoch());
    if (a.empty() || b.empty() || t1 < t0 - 1e-9)
        throw NoOverlap("intersect_span: no common samples");
    TimeSeries sa = a.slice_time(t0, t1 + a.period_s * 0.5);
    TimeSeries sb = b.slice_time(t0, t1 + a.period_s * 0.5);
    return {sa, sb};
}

} // namespace ersm
