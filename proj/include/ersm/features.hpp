#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ersm/dsp.hpp"
#include "ersm/errors.hpp"
#include "ersm/kp.hpp"
#include "ersm/longnorm.hpp"
#include "ersm/timeseries.hpp"

namespace ersm {

// Per-timestamp regression rows: time of day, time derivative of the aligned
// series, the aligned magnitude itself, and a storm flag (Kp >= 7). Targets
// are present for training matrices only.
struct FeatureMatrix {
    std::vector<double> epochs;
    std::vector<double> tod_s;
    std::vector<double> deriv_nTps;
    std::vector<double> mag_nT;
    std::vector<uint8_t> storm_flag;
    std::vector<double> target_nT;
    double period_s = 60.0;

    size_t rows() const { return epochs.size(); }
    bool has_target() const { return !target_nT.empty(); }
};

inline double time_of_day_s(double epoch_s) {
    double tod = std::fmod(epoch_s, 86400.0);
    if (tod < 0.0) tod += 86400.0;
    return tod;
}

// Feature rows from an aligned series; pass the matching local series to
// attach training targets, or nullptr for a prediction matrix.
inline FeatureMatrix build_features(const TimeSeries& aligned_ers,
                                    const TimeSeries* truncated_lrs,
                                    const KpSeries& kp) {
    if (truncated_lrs)
        require_same_grid(aligned_ers, *truncated_lrs, "build_features");
    TimeSeries deriv = time_derivative(aligned_ers);
    FeatureMatrix fm;
    fm.period_s = aligned_ers.period_s;
    const size_t n = aligned_ers.size();
    fm.epochs.resize(n);
    fm.tod_s.resize(n);
    fm.deriv_nTps.resize(n);
    fm.mag_nT.resize(n);
    fm.storm_flag.resize(n);
    if (truncated_lrs) fm.target_nT.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double t = aligned_ers.epoch_at(i);
        fm.epochs[i] = t;
        fm.tod_s[i] = time_of_day_s(t);
        fm.deriv_nTps[i] = deriv.values[i];
        fm.mag_nT[i] = aligned_ers.values[i];
        fm.storm_flag[i] = kp_at(kp, t) >= 7.0 ? 1 : 0;
        if (truncated_lrs) fm.target_nT[i] = truncated_lrs->values[i];
    }
    return fm;
}

inline FeatureMatrix build_features(const AlignmentResult& aligned,
                                    const KpSeries& kp) {
    return build_features(aligned.aligned_ers, &aligned.truncated_lrs, kp);
}

// Empirical-CDF map of one feature onto uniform [0, 1]: up to 1000 quantile
// anchors, linear interpolation between anchors, clipping outside the
// training range.
struct QuantileMap {
    std::vector<double> quantiles;  // ascending anchor values

    static QuantileMap fit(std::vector<double> values) {
        if (values.empty())
            throw InvalidArgument("QuantileMap: no training values");
        std::sort(values.begin(), values.end());
        size_t n_anchors = std::min<size_t>(1000, values.size());
        QuantileMap qm;
        qm.quantiles.resize(n_anchors);
        if (n_anchors == 1) {
            qm.quantiles[0] = values[0];
            return qm;
        }
        for (size_t j = 0; j < n_anchors; ++j) {
            double q = static_cast<double>(j) / static_cast<double>(n_anchors - 1);
            double pos = q * static_cast<double>(values.size() - 1);
            size_t i0 = static_cast<size_t>(pos);
            double frac = pos - static_cast<double>(i0);
            qm.quantiles[j] = i0 + 1 < values.size()
                ? values[i0] * (1.0 - frac) + values[i0 + 1] * frac
                : values.back();
        }
        return qm;
    }

    double transform(double v) const {
        const auto& q = quantiles;
        if (q.size() < 2) return 0.0;
        if (v <= q.front()) return 0.0;
        if (v >= q.back()) return 1.0;
        size_t hi = std::upper_bound(q.begin(), q.end(), v) - q.begin();
        size_t lo = hi - 1;
        double denom = q[hi] - q[lo];
        double frac = denom > 0.0 ? (v - q[lo]) / denom : 0.0;
        return (static_cast<double>(lo) + frac) / static_cast<double>(q.size() - 1);
    }
};

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stdev;

    static Standardizer fit(const std::vector<std::vector<double>>& columns) {
        Standardizer s;
        for (const auto& col : columns) {
            if (col.empty())
                throw InvalidArgument("Standardizer: empty column");
            double m = 0.0;
            for (double v : col) m += v;
            m /= static_cast<double>(col.size());
            double var = 0.0;
            for (double v : col) var += (v - m) * (v - m);
            var /= static_cast<double>(col.size());
            double sd = std::sqrt(var);
            s.mean.push_back(m);
            s.stdev.push_back(sd > 0.0 ? sd : 1.0);
        }
        return s;
    }

    double apply(size_t col, double v) const {
        return (v - mean[col]) / stdev[col];
    }
};

} // namespace ersm
