#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ersm/errors.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

struct CleanStats {
    size_t spikes_removed = 0;
    size_t gaps_filled = 0;
};

// Despike against a centered rolling median (window 11 samples, clipped at
// the edges, gaps excluded from the window), then fill all gaps by linear
// interpolation; leading/trailing gaps take the nearest valid value.
inline TimeSeries clean_series(const TimeSeries& ts,
                               double spike_threshold_nT = 100.0,
                               CleanStats* stats = nullptr) {
    if (spike_threshold_nT <= 0.0)
        throw InvalidArgument("clean_series: threshold must be positive");
    const size_t n = ts.size();
    TimeSeries out = ts;
    out.gap_mask.resize(n, 0);
    for (size_t i = 0; i < n; ++i)
        if (std::isnan(out.values[i])) out.gap_mask[i] = 1;

    // spike pass
    const int half = 5;
    std::vector<double> window;
    size_t spikes = 0;
    for (size_t i = 0; i < n; ++i) {
        if (out.is_gap(i)) continue;
        window.clear();
        size_t j0 = i >= static_cast<size_t>(half) ? i - half : 0;
        size_t j1 = std::min(n, i + half + 1);
        for (size_t j = j0; j < j1; ++j)
            if (!out.is_gap(j)) window.push_back(out.values[j]);
        if (window.empty()) continue;
        size_t mid = window.size() / 2;
        std::nth_element(window.begin(), window.begin() + mid, window.end());
        double med = window[mid];
        if (window.size() % 2 == 0) {
            double lower = *std::max_element(window.begin(), window.begin() + mid);
            med = 0.5 * (med + lower);
        }
        if (std::abs(out.values[i] - med) > spike_threshold_nT) {
            out.gap_mask[i] = 1;
            ++spikes;
        }
    }

    // fill pass
    size_t filled = 0;
    ptrdiff_t prev_valid = -1;
    ptrdiff_t first_valid = -1;
    for (size_t i = 0; i < n; ++i) {
        if (out.is_gap(i)) continue;
        if (first_valid < 0) first_valid = static_cast<ptrdiff_t>(i);
        if (prev_valid >= 0 && static_cast<size_t>(prev_valid) + 1 < i) {
            double v0 = out.values[prev_valid];
            double v1 = out.values[i];
            double span = static_cast<double>(i - prev_valid);
            for (size_t j = prev_valid + 1; j < i; ++j) {
                double frac = static_cast<double>(j - prev_valid) / span;
                out.values[j] = v0 * (1.0 - frac) + v1 * frac;
                ++filled;
            }
        }
        prev_valid = static_cast<ptrdiff_t>(i);
    }
    if (first_valid < 0)
        throw EmptySeries("clean_series: every sample is a gap");
    for (ptrdiff_t j = 0; j < first_valid; ++j) {
        out.values[j] = out.values[first_valid];
        ++filled;
    }
    for (size_t j = prev_valid + 1; j < n; ++j) {
        out.values[j] = out.values[prev_valid];
        ++filled;
    }

    if (stats) {
        stats->spikes_removed = spikes;
        stats->gaps_filled = filled;
    }
    return out;
}

} // namespace ersm
